"""
HCGL CLI - Entry point for python -m hcgl_cli.
"""
from hcgl_cli.main import cli_main

if __name__ == "__main__":
    cli_main()
