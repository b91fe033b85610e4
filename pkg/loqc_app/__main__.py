"""Allow ``python -m loqc_app``."""

import sys

from loqc_app.main import main

sys.exit(main())
