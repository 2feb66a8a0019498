import glob
import json
import os
import sys
from datetime import datetime

from sg_oscint import handler


def load_jobs(job_dir):
    """Every *.json job config in job_dir, keyed by file stem."""
    for path in sorted(glob.glob(os.path.join(job_dir, "*.json"))):
        with open(path) as f:
            yield os.path.splitext(os.path.basename(path))[0], json.load(f)


def run_jobs(job_dir, out_dir):
    now = datetime.now().strftime("%Y-%m-%d-%H:%M:%S")
    statuses = {}
    for name, job in load_jobs(job_dir):
        job["out"] = out_dir
        job["name"] = f"{name}-{now}"
        statuses[name] = handler(job)["statusCode"]
    return statuses


def main():
    job_dir = sys.argv[1]
    out_dir = sys.argv[2] if len(sys.argv) > 2 else "output_data"
    statuses = run_jobs(job_dir, out_dir)
    for name, status in statuses.items():
        print(f"{name}: {status}")
    return max(statuses.values(), default=0)


if __name__ == "__main__":
    sys.exit(main())
