import os
import sys

# Under ctest, test the module staged in the build tree rather than any
# installed (possibly stale) copy.
_pkg = os.environ.get("INSLEN_PYPKG")
if _pkg:
    sys.meta_path[:] = [f for f in sys.meta_path if type(f).__name__ != "ScikitBuildRedirectingFinder"]
    sys.path.insert(0, _pkg)
