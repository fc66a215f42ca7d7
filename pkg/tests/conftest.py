import os

# keep worker counts predictable inside the test suite unless overridden
os.environ.setdefault("BLOCKPRIOR_WORKERS", str(os.cpu_count() or 1))
