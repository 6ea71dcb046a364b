import sys

from lamperti.cli import main

sys.exit(main())
