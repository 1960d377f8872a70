"""
Build script to create a standalone tpdc executable using PyInstaller.
Run: python build.py
"""

import os
import subprocess
import sys


def main():
    script_dir = os.path.dirname(os.path.abspath(__file__))
    run_py = os.path.join(script_dir, "run.py")
    sep = ";" if os.name == "nt" else ":"

    cmd = [
        sys.executable, "-m", "PyInstaller",
        "--onefile",
        "--console",
        "--name", "tpdc",
        "--add-data", f"tpdc{sep}tpdc",
        # sympy loads its wigner module lazily
        "--hidden-import", "sympy.physics.wigner",
        "--noconfirm",
        "--clean",
        run_py,
    ]

    print("Building tpdc with PyInstaller...")
    print(f"Command: {' '.join(cmd)}")
    print()

    result = subprocess.run(cmd, cwd=script_dir)

    if result.returncode == 0:
        exe_name = "tpdc.exe" if os.name == "nt" else "tpdc"
        print()
        print("Build successful!")
        print(f"Executable: {os.path.join(script_dir, 'dist', exe_name)}")
    else:
        print(f"Build failed with exit code {result.returncode}")
        sys.exit(1)


if __name__ == "__main__":
    main()
