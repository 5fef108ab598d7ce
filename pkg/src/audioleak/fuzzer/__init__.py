from .campaign import (
    ActivationOracle,
    Outcome,
    SensorLogOracle,
    SimulatedOracle,
    candidates_for,
    discovered,
    distance_histogram,
    fuzz_report,
    load_false_wakewords,
    run_campaign,
)
from .dictionary import (
    ParseReport,
    PronunciationEntry,
    UnknownWord,
    WakeWordCandidate,
    load_dictionary,
    parse_dictionary,
    select_candidates,
)
from .phonetics import levenshtein, metaphone
