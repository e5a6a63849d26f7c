#!/usr/bin/env python3
"""Mock child doing an actual least-squares fit: target ~ a*x0 + b."""
import json
import sys

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    request = json.loads(line)
    rows = request["rows"]
    target = request["target"]
    n = len(rows)
    if n == 0:
        sys.stdout.write(json.dumps({"ok": False, "error": "empty prompt"}) + "\n")
        sys.stdout.flush()
        continue
    xs = [r[0] for r in rows]
    mean_x = sum(xs) / n
    mean_t = sum(target) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxt = sum((x - mean_x) * (t - mean_t) for x, t in zip(xs, target))
    a = sxt / sxx if sxx > 0 else 0.0
    b = mean_t - a * mean_x
    reply = {"ok": True, "equation": f"{a!r} * x0 + {b!r}"}
    sys.stdout.write(json.dumps(reply) + "\n")
    sys.stdout.flush()
