from ._sepsearch import *  # noqa: F401,F403
from ._sepsearch import SepsearchError, __doc__  # noqa: F401
