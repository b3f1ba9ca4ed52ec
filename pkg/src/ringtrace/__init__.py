"""Traceability analysis for ring-signature ledgers, including hard forks."""

from .deduction import (
    ALL_RULES, CC, IR, ZMR, DeductionResult, Mark, MarkStore, allowed_edge_filter,
    cross_chain_intersect, effective_ringsize, export_result, load_result, run_fixpoint,
    zero_mixin_sweep,
)
from .errors import (
    ConfigError, DuplicateField, EmptyEvaluation, EmptyWindow, ExhaustedDecoyPool, HeightGap,
    InconsistentLedger, IngestionError, LedgerSyntaxError, LedgerValidationError, RingTraceError,
    TooLarge, UnknownKeyImage, UnknownOutputRef, Unsatisfiable,
)
from .heuristics import (
    AccuracyRow, Guess, accuracy_csv, evaluate, guess_newest, guesses_for, output_merging_guesses,
)
from .ingest import BranchSpec, ForkSpec, ValidationReport, build_ledger, load_ledger, parse_branch_file
from .ledger import Block, Branch, LedgerView, Output, OutputRef, Ring, Transaction
from .matching import allowed_edges, hopcroft_karp
from .oracle import OracleResult, enumerate_assignments
from .reporting import MonthlyRow, Window, delta_report, monthly_aggregate, monthly_csv
from .simulator import ForkConfig, GroundTruth, SimConfig, SimulationResult, simulate

__version__ = "0.1.0"
