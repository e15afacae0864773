"""Allow ``python -m sketchjack``."""

from .cli import main

raise SystemExit(main())
