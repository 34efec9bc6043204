import os

# pin BLAS to one thread before numpy is imported anywhere in the suite,
# so runtime-bound tests measure honest single-core time
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
