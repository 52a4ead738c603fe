"""Incremental maintenance of conjunctive queries under single-tuple updates."""
from .query import Atom, Database, Query, QueryError, Update, apply_update, parse_query, parse_stream, query, restrict
from .width import fhtw, gyo, is_acyclic, is_hierarchical, multivariate_extension, rho_star, time_extension, w_hat
from .insert_only import InsertOnlyEngine
from .insert_delete import InsertDeleteEngine
from .baselines import DeltaEngine, NaiveEngine

__version__ = "0.1.0"
