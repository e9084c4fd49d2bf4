from .config import RunConfig, from_dict, load_config
from .runner import run
from .table import ResultTable, export_csv, read_csv

__all__ = ["RunConfig", "ResultTable", "export_csv", "from_dict", "load_config", "read_csv", "run"]
