# run_app.py
import sys
import subprocess
import importlib
import os

APP_FILENAME = "dashboard.py"
REQUIRED_PKGS = ["matplotlib", "streamlit", "PIL"]


def run(cmd, check=True):
    proc = subprocess.run(cmd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    print(proc.stdout)
    if check and proc.returncode != 0:
        raise SystemExit(f"Command failed: {' '.join(cmd)} (exit {proc.returncode})")
    return proc


def missing_packages():
    missing = []
    for pkg in REQUIRED_PKGS:
        try:
            importlib.import_module(pkg)
        except ImportError:
            missing.append(pkg)
    return missing


def install_requirements_txt():
    req = os.path.join(os.path.dirname(os.path.abspath(__file__)), "requirements.txt")
    if os.path.exists(req):
        print("Installing from requirements.txt...")
        run([sys.executable, "-m", "pip", "install", "-r", req])


def launch_streamlit(app_path, out_dir=None):
    print(f"Launching Streamlit app: {app_path}")
    cmd = [sys.executable, "-m", "streamlit", "run", app_path]
    if out_dir:
        cmd += ["--", out_dir]
    run(cmd, check=False)


def main(argv=None):
    args = list(sys.argv[1:] if argv is None else argv)
    install = "--install" in args
    if install:
        args.remove("--install")

    # 1) Dependencies
    missing = missing_packages()
    if missing and install:
        install_requirements_txt()
    elif missing:
        raise SystemExit(
            f"Missing packages: {', '.join(missing)}. "
            "Rerun with --install or run 'pip install -r requirements.txt'."
        )

    # 2) Verify app file exists
    app_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), APP_FILENAME)
    if not os.path.exists(app_path):
        raise SystemExit(f"Streamlit app file not found: {app_path}")

    # 3) Launch Streamlit, optionally pointed at a run directory
    launch_streamlit(app_path, args[0] if args else None)


if __name__ == "__main__":
    main()
