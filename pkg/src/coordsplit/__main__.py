"""``python -m coordsplit <app> [flags]``."""

import sys

from .apps import bench, lasso, logistic, nmf, portfolio

COMMANDS = {
    "fbs-l1-log": logistic.main_l1,
    "fbs-l2-log": logistic.main_l2,
    "fbs-lasso": lasso.main,
    "portfolio": portfolio.main,
    "nmf": nmf.main,
    "bench": bench.main,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] not in COMMANDS:
        sys.stderr.write(f"usage: python -m coordsplit {{{','.join(COMMANDS)}}} [flags]\n")
        return 1
    return COMMANDS[argv[0]](argv[1:])


if __name__ == "__main__":
    sys.exit(main())
