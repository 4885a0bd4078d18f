#!/usr/bin/env python3
"""
Startup script: checks dependencies and the result cache, then hands over to the CLI
"""
import sys


def check_dependencies():
    """Check if all required dependencies are available"""
    print("🔍 Checking dependencies...")

    required_modules = [
        'numpy',
        'scipy',
    ]

    optional_modules = [
        'pytest',
    ]

    missing_required = []
    missing_optional = []

    for module in required_modules:
        try:
            __import__(module)
            print(f"  ✓ {module}")
        except ImportError:
            missing_required.append(module)
            print(f"  ✗ {module} (required)")

    for module in optional_modules:
        try:
            __import__(module)
            print(f"  ✓ {module}")
        except ImportError:
            missing_optional.append(module)
            print(f"  ⚠ {module} (optional - needed only to run the test suite)")

    if missing_required:
        print(f"\n❌ Missing required dependencies: {', '.join(missing_required)}")
        print("Please install them with: pip install -r requirements.txt")
        return False

    print("✅ All required dependencies available!")
    return True


def check_cache(directory: str = None):
    """Open (or create) the result cache"""
    print("\n🗄️  Opening result cache...")

    try:
        from database import ResultCache
        from solver_config import CACHE_CONFIG

        cache = ResultCache(directory or CACHE_CONFIG['directory'])
        cache.init_db()
        print(f"✅ Result cache ready ({cache.count()} stored sweeps)")
        return True

    except Exception as e:
        print(f"❌ Result cache unavailable: {e}")
        print("Run with --no-cache to compute without it.")
        return False


def main(argv=None):
    """Main startup function"""
    argv = list(sys.argv[1:] if argv is None else argv)
    print("🧲 Casimir solver startup", file=sys.stderr)

    if not check_dependencies():
        return 1

    if '--no-cache' not in argv and not check_cache():
        return 1

    from cli import main as cli_main
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
