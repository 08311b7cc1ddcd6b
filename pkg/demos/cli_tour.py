# Drive each nilmetry subcommand once and show the CSV it writes.
import subprocess
import sys

RUNS = [
    ["list"],
    ["triangle", "--seed", "1"],
    ["qi", "--seed", "1", "--map", "shear(abs)", "--samples", "5000"],
    ["qi", "--seed", "1", "--map", "Flambda:2", "--metric", "koranyi", "--samples", "5000", "--claimed", "3,1"],
    ["cone", "--seed", "1", "--map", "shear(power:0.5)"],
    ["foliation", "--seed", "1", "--map", "Flambda:2", "--z", "4+4j,8+8j"],
    ["lift", "--seed", "1", "--planar", "cube_root_shear", "--z", "1+2j,0+8j"],
]

for args in RUNS:
    print("$ nilmetry", " ".join(args))
    proc = subprocess.run([sys.executable, "-m", "nilmetry", *args], capture_output=True, text=True)
    print(proc.stdout.rstrip() or proc.stderr.rstrip())
    print(f"[exit {proc.returncode}]\n")
