"""python -m nestedot"""

from nestedot.cli import main

raise SystemExit(main())
