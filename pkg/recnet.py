"""RecNet command line."""
import sys

from src.commands import build_parser, logger
from src.config import load_config
from src.utils.exceptions import EXIT_RUNTIME, EXIT_USAGE, RecNetError
from src.utils.logger import configure_all


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_all(verbose=args.verbose, quiet=args.quiet)

    try:
        config = load_config(args.config, seed=args.seed)
        return args.handler(args, config)
    except RecNetError as error:
        logger.error(str(error))
        return error.exit_code
    except FileNotFoundError as error:
        logger.error(str(error))
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
