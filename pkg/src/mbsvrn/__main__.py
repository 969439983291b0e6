from mbsvrn.cli import main
import sys

sys.exit(main())
