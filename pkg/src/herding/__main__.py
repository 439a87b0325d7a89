import sys

from herding.cli import main

sys.exit(main())
