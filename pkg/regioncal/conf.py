from django.conf import settings
from django.core.signals import setting_changed
from django.dispatch import receiver

# -- parallelism

# Number of workers for per-image and per-class work.
# None means os.cpu_count(). The CLI also reads the REGIONCAL_JOBS environment variable.
REGIONCAL_JOBS = getattr(settings, "REGIONCAL_JOBS", None)

# -- SVM training

# Fixed regularization constant of the SVM objective (reg * 1/2 |w|^2 + data term).
REGIONCAL_REG_STRENGTH = getattr(settings, "REGIONCAL_REG_STRENGTH", 1.0)

# Stopping tolerance and iteration cap for the L-BFGS-B primal solver.
REGIONCAL_SVM_TOLERANCE = getattr(settings, "REGIONCAL_SVM_TOLERANCE", 1e-10)
REGIONCAL_SVM_MAX_ITER = getattr(settings, "REGIONCAL_SVM_MAX_ITER", 5000)

# Hard-negative mining: scan batch size, margin threshold and a cap on the rounds.
REGIONCAL_MINING_BATCH_SIZE = getattr(settings, "REGIONCAL_MINING_BATCH_SIZE", 5000)
REGIONCAL_MINING_THRESHOLD = getattr(settings, "REGIONCAL_MINING_THRESHOLD", 0.0)
REGIONCAL_MINING_MAX_ROUNDS = getattr(settings, "REGIONCAL_MINING_MAX_ROUNDS", 50)

# Region proposals overlapping a ground-truth region by more than this are positives.
REGIONCAL_IOU_THRESHOLD = getattr(settings, "REGIONCAL_IOU_THRESHOLD", 0.5)

# -- weak supervision

# Default number of train/relabel rounds (stops earlier on a fixed point).
REGIONCAL_WS_ROUNDS = getattr(settings, "REGIONCAL_WS_ROUNDS", 5)

# -- calibration

# Number of calibrated score columns (class, a, b) kept in memory during coordinate descent.
# None sizes the cache from the class count and the grid.
REGIONCAL_COLUMN_CACHE_SIZE = getattr(settings, "REGIONCAL_COLUMN_CACHE_SIZE", None)


@receiver(setting_changed)
def _on_settings_change(setting, value, enter, **kwargs):
    if not setting.startswith("REGIONCAL_"):
        return

    globals()[setting] = value
