import sys

from wae.cli import main

sys.exit(main())
