# main.py
import sys
from dotenv import load_dotenv

from turbobw.cli import main as cli_main


def main():
    # TURBOBW_* overrides may live in a .env file next to this script
    load_dotenv()
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
