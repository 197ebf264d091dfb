import sys

from barriertop.main import main

sys.exit(main())
