"""Main module."""

import logging
import sys

from st_glmm_tools.commands import LOG_FORMAT, cli_entry

if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        format=LOG_FORMAT,
    )

    sys.exit(cli_entry())
