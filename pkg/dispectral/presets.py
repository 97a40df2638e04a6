"""Named models used throughout the experiments."""

import enum

import numpy as np

from dispectral.errors import ValidationError
from dispectral.graph import SbmModel, block_memberships, pathwise_spec, two_block_spec
from dispectral.theory import calibrate_s


@enum.unique
class ModelPreset(enum.Enum):
    TWO_BLOCK = "two-block"
    # Fluctuation models with unequal clusters p = (2/3, 1/3).
    F1 = "F1"
    F2 = "F2"
    PATHWISE_K6_D2 = "pathwise-k6-d2"


class ModelKind(enum.Enum):
    PATHWISE = "pathwise"
    TWO_BLOCK = "two-block"
    CUSTOM_F = "custom-F"


class PresetInfo:
    def __init__(
        self,
        name,
        kind,
        n,
        r_blocks=2,
        s=None,
        d=None,
        eta=None,
        F=None,
        proportions=None,
        description="",
    ):
        self.name = name
        self.kind = kind
        self.n = n
        self.r_blocks = r_blocks
        self.s = s
        self.d = d
        self.eta = eta
        self.F = F
        self.proportions = proportions
        self.description = description

    def build(self, n=None):
        """Instantiate the model, optionally at another size."""
        return build_model(
            self.kind,
            n=self.n if n is None else n,
            r_blocks=self.r_blocks,
            s=self.s,
            d=self.d,
            eta=self.eta,
            F=self.F,
            proportions=self.proportions,
        )


FLUCTUATION_PROPORTIONS = (2 / 3, 1 / 3)

PRESETS = {
    ModelPreset.TWO_BLOCK: PresetInfo(
        "two-block",
        ModelKind.TWO_BLOCK,
        n=2000,
        s=10.0,
        eta=0.9,
        description="Two equal blocks, s=10, eta=0.9: one outlier.",
    ),
    ModelPreset.F1: PresetInfo(
        "F1",
        ModelKind.CUSTOM_F,
        n=5000,
        F=((6.0, 4.0), (5.0, 3.0)),
        proportions=FLUCTUATION_PROPORTIONS,
        description="Sparse fluctuation model: one outlier, atom at zero.",
    ),
    ModelPreset.F2: PresetInfo(
        "F2",
        ModelKind.CUSTOM_F,
        n=5000,
        F=((48.0, 6.0), (12.0, 24.0)),
        proportions=FLUCTUATION_PROPORTIONS,
        description="Semi-sparse fluctuation model: two outliers.",
    ),
    # 2500 nodes rounded down to a multiple of 6.
    ModelPreset.PATHWISE_K6_D2: PresetInfo(
        "pathwise-k6-d2",
        ModelKind.PATHWISE,
        n=2496,
        r_blocks=6,
        d=2.0,
        eta=0.55,
        description="Pathwise model with 6 blocks at mean degree 2.",
    ),
}


def find_preset(name):
    """Look up a preset by name; None when there is no such preset."""
    try:
        return PRESETS[ModelPreset(name)]
    except ValueError:
        return None


def round_to_blocks(n, r_blocks):
    """Largest multiple of r_blocks not above n."""
    return (n // r_blocks) * r_blocks


def build_model(kind, n, r_blocks=2, s=None, d=None, eta=None, F=None, proportions=None):
    """
    Build an SbmModel from declarative parameters.

    Pathwise models take either s or a target mean degree d (s is then calibrated).
    """
    kind = ModelKind(kind) if not isinstance(kind, ModelKind) else kind
    if kind in (ModelKind.PATHWISE, ModelKind.TWO_BLOCK):
        if kind is ModelKind.TWO_BLOCK:
            r_blocks = 2
        if eta is None:
            raise ValidationError(f"A {kind.value} model needs eta.")
        if s is None:
            if d is None:
                raise ValidationError(f"A {kind.value} model needs s or d.")
            s = calibrate_s(r_blocks, d)
        if kind is ModelKind.TWO_BLOCK:
            return two_block_spec(s, eta, n)
        return pathwise_spec(r_blocks, s, eta, n)

    if F is None:
        raise ValidationError("A custom-F model needs F.")
    F = np.asarray(F, dtype=float)
    if proportions is None:
        proportions = np.full(F.shape[0], 1 / F.shape[0])
    if len(proportions) != F.shape[0]:
        raise ValidationError(f"Need {F.shape[0]} proportions, got {len(proportions)}.")
    return SbmModel(n=n, F=F, sigma_left=block_memberships(proportions, n))
