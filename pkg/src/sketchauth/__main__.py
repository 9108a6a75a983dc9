import sys

from sketchauth.cli import main

sys.exit(main())
