import sys

from fedfair.cli import main

sys.exit(main())
