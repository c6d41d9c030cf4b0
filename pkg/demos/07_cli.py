"""Driving the command line tool and reading its JSON report.

Run: python3 demos/07_cli.py
"""
import json
import subprocess
import sys

cmd = [sys.executable, "-m", "massey_flow", "oracle", "fixture:shift", "--compare", "--format", "json"]
out = subprocess.run(cmd, capture_output=True, text=True)
doc = json.loads(out.stdout)
print("exit", out.returncode, "| schema", doc["schema"], "| input digest", doc["input"]["digest"][:12])
for v in doc["verdicts"]:
    print(f"  {v['invariant']:32s} residual {v['residual']:.1e} tol {v['tol']:.0e} passed={v['passed']}")

# The same command twice gives the same bytes.
again = subprocess.run(cmd, capture_output=True, text=True)
print("byte-identical:", again.stdout == out.stdout)

# An invalid input exits 1.
bad = subprocess.run([sys.executable, "-m", "massey_flow", "validate", "fixture:corrupted-bracket"],
                     capture_output=True, text=True)
print("corrupted bracket exit", bad.returncode)
print(bad.stdout.strip().splitlines()[-1])
