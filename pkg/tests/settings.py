from environ import Env

env = Env()

INSTALLED_APPS = [
    "regioncal",
]

# Test session requirements

SECRET_KEY = "insecure-tests-only"

# Run single threaded by default, CI may raise this to exercise the worker pool.
REGIONCAL_JOBS = env.int("REGIONCAL_JOBS", default=1)
