"""Run the ``regioncal`` command without a Django project.

When no settings module is configured, minimal settings are used.
"""
import os
import sys

import django
from django.conf import settings

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        "regioncal": {"handlers": ["console"], "level": "WARNING", "propagate": False},
    },
}


def main(argv=None):
    if not settings.configured and "DJANGO_SETTINGS_MODULE" not in os.environ:
        settings.configure(INSTALLED_APPS=["regioncal"], LOGGING=LOGGING)
    django.setup()

    from regioncal.management.commands.regioncal import Command

    argv = sys.argv if argv is None else argv
    Command().run_from_argv(["regioncal", "regioncal", *argv[1:]])


if __name__ == "__main__":
    main()
