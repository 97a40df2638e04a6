"""
Execute dispectral as a module.

This does exactly the same as calling the 'dispectral' console script.
"""

import sys

from dispectral.main import main as dispectral_main


def main():
    """
    Separate main method, different from dispectral.main.

    This way it can be used as an entry point for a console script.
    :return None:
    """
    dispectral_main(*sys.argv[1:])


if __name__ == "__main__":
    main()
