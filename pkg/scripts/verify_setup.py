"""
Verification script to check if the project is set up correctly.
"""
import sys
from pathlib import Path

# Add parent directory to path to import src modules
sys.path.insert(0, str(Path(__file__).parent.parent))


def verify_environment():
    """Verify settings load and the output directory is writable."""
    print("🔍 Checking settings...")
    try:
        from src.config import get_settings

        settings = get_settings()
        settings.output_dir.mkdir(parents=True, exist_ok=True)
        print(f"  ✓ Output directory: {settings.output_dir}")
        print(f"  ✓ Log level: {settings.log_level}")
        print(f"  ✓ Environment: {settings.environment}")
        return True
    except Exception as e:
        print(f"  ✗ Error loading settings: {e}")
        print("  Check TBNORM_* variables and your .env file")
        return False


def verify_dependencies():
    """Verify all required packages are installed."""
    print("\n🔍 Checking dependencies...")
    required_packages = [
        "numpy",
        "pandas",
        "pydantic",
        "pydantic_settings",
        "dotenv",
        "pytest",
        "hypothesis",
    ]

    all_installed = True
    for package in required_packages:
        try:
            __import__(package)
            print(f"  ✓ {package}")
        except ImportError:
            print(f"  ✗ {package} not installed")
            all_installed = False

    return all_installed


def verify_gradients():
    """Run a quick finite-difference check of every layer kind."""
    print("\n🔍 Checking layer gradients...")
    from src.gradcheck import check_layer

    problems = [
        ("bn", (6, 4, 2, 2), {}),
        ("gn", (6, 4, 2, 2), {}),
        ("cn", (6, 4, 2, 2), {}),
        ("tbbn", (12, 4, 2, 2), {"t": 3, "bc": 8, "bp": 4}),
    ]
    all_passed = True
    for kind, shape, extra in problems:
        report = check_layer(kind, shape, **extra)
        mark = "✓" if report.passed else "✗"
        print(f"  {mark} {kind}: max relative error {report.max_rel_error:.2e}")
        all_passed = all_passed and report.passed
    return all_passed


def main():
    """Run all verification checks."""
    print("=" * 60)
    print("tbnorm - Setup Verification")
    print("=" * 60)

    results = {
        "Settings": verify_environment(),
        "Dependencies": verify_dependencies(),
    }
    if results["Dependencies"]:
        results["Gradients"] = verify_gradients()

    print("\n" + "=" * 60)
    print("Summary")
    print("=" * 60)
    for check, passed in results.items():
        status = "✓ PASS" if passed else "✗ FAIL"
        print(f"{status}: {check}")

    all_passed = all(results.values())
    if all_passed:
        print("\n🎉 All checks passed! Try: python -m src.main cil-run --norm tbbn")
    else:
        print("\n⚠️  Some checks failed. Please review the errors above.")
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
