"""
Entry point for the two-photon decay calculator (tpdc).
"""

import sys
import traceback

from tpdc.cli.main import main as cli_main

EXIT_UNEXPECTED = 1


def _global_exception_handler(exc_type, exc_value, exc_tb):
    """Print unexpected failures in full and leave with exit code 1."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.stderr.write("\nInterrupted.\n")
        sys.exit(130)
    tb_text = "".join(traceback.format_exception(exc_type, exc_value, exc_tb))
    sys.stderr.write("An unexpected error occurred:\n\n" + tb_text)
    sys.exit(EXIT_UNEXPECTED)


def main():
    sys.excepthook = _global_exception_handler
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
