#!/usr/bin/env python3
"""
Runner script for the vector equilibrium toolkit
Checks dependencies, puts src/ on the path and hands over to the CLI
"""

import os
import sys
import subprocess
import logging

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

REQUIRED_MODULES = {
    'numpy': 'numpy',
    'pandas': 'pandas',
    'pydantic': 'pydantic',
    'networkx': 'networkx',
    'python-dotenv': 'dotenv',
}


def check_dependencies():
    """Check which dependencies are available"""
    deps = {}
    for name, module in REQUIRED_MODULES.items():
        try:
            __import__(module)
            deps[name] = True
        except ImportError:
            deps[name] = False
    return deps


def install_dependencies():
    """Install missing dependencies"""
    logger.info("Installing dependencies...")
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        logger.info("Dependencies installed successfully")
        return True
    except subprocess.CalledProcessError as e:
        logger.error(f"Failed to install dependencies: {e}")
        return False


def main():
    """Main entry point; arguments other than --install go to the CLI"""
    argv = [arg for arg in sys.argv[1:] if arg != '--install']

    deps = check_dependencies()
    missing_deps = [name for name, available in deps.items() if not available]
    if missing_deps:
        logger.warning(f"Missing dependencies: {', '.join(missing_deps)}")
        if '--install' in sys.argv and install_dependencies():
            missing_deps = [name for name, available in check_dependencies().items() if not available]
        if missing_deps:
            logger.error("Install them with: pip install -r requirements.txt (or rerun with --install)")
            return 1

    src_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src')
    if src_path not in sys.path:
        sys.path.insert(0, src_path)

    from cli import main as cli_main  # type: ignore

    return cli_main(argv)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nExiting...")
        sys.exit(130)
    except Exception as e:
        logger.error(f"Application failed: {e}")
        sys.exit(1)
