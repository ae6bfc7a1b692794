"""Run the acceptance suite and write its PASS/FAIL lines to a file.

    python3 scripts/run_acceptance.py --out acceptance.txt
"""

import argparse
import pathlib
import subprocess
import sys


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="acceptance.txt")
    a = ap.parse_args(argv)
    tests = pathlib.Path(__file__).resolve().parents[1] / "tests" / "test_acceptance.py"
    proc = subprocess.run([sys.executable, "-m", "pytest", str(tests), "-q", "-s"], capture_output=True, text=True)
    lines = [ln for ln in proc.stdout.splitlines() if ln.startswith(("PASS", "FAIL"))]
    pathlib.Path(a.out).write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return proc.returncode


if __name__ == "__main__":
    sys.exit(main())
