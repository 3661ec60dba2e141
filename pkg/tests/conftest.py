import os
from pathlib import Path

# reference solutions are cached next to the repository so repeated test runs
# (and the acceptance suite) do not recompute multi-minute fine-step runs
os.environ.setdefault(
    "MONODT_CACHE_DIR", str(Path(__file__).resolve().parent.parent / ".monodt_cache"))
