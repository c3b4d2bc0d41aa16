import sys

from uav_isac.cli import main


# ------------------------ Start of the main experiment script
if __name__ == "__main__":
    # ------------------------ Input arguments
    # solve | sweep | verify | compare, see `python main_isac.py --help`
    sys.exit(main())
