#!/usr/bin/env python3
"""Mock child that always reports a failed fit."""
import json
import sys

for _ in sys.stdin:
    sys.stdout.write(json.dumps({"ok": False, "error": "no equation found"}) + "\n")
    sys.stdout.flush()
