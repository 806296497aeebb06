import sys

from paflab.cli import main

sys.exit(main())
