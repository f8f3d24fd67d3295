#!/usr/bin/env python3
"""
Quick cavion dependency check - simple version.
"""

import sys

# Fix encoding
if sys.platform == 'win32':
    try:
        sys.stdout.reconfigure(encoding='utf-8', errors='replace')
    except Exception:
        pass


def check(import_name):
    """Check if a package is installed."""
    try:
        __import__(import_name)
        return True
    except ImportError:
        return False


print("\n=== CAVION QUICK CHECK ===\n")

packages = [
    ("numpy", "numpy", True),
    ("scipy", "scipy", True),
    ("python-dotenv", "dotenv", True),
    ("psutil", "psutil", False),
    ("Pillow", "PIL", False),
    ("colorama", "colorama", False),
    ("tqdm", "tqdm", False),
    ("tomli-w", "tomli_w", False),
]
if sys.version_info < (3, 11):
    packages.append(("tomli", "tomli", False))

print("PYTHON PACKAGES:")
missing = []
for pkg, imp, required in packages:
    if check(imp):
        print(f"  [OK] {pkg}")
    else:
        print(f"  [--] {pkg}{' (required)' if required else ''}")
        missing.append(pkg)

print("\nENGINE:")
if check("cavion"):
    from cavion import config
    from cavion.cavity import CavityParams, cavity_purcell, mode_geometry

    geometry = mode_geometry(CavityParams())
    print(f"  [OK] finesse {geometry.finesse:,.0f}, waist {geometry.waist_um:.2f} um")
    print(f"  [OK] expected Purcell factor {cavity_purcell(CavityParams(), config.SCATTERER_LOSS_PPM):.0f}")
    print(f"  [OK] {config.default_threads()} worker threads")
else:
    print("  [--] cavion not importable")

if missing:
    print(f"\nInstall missing: pip install {' '.join(missing)}")
else:
    print("\nAll dependencies present.")
