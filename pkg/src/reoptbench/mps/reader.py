"""MPS reader.

Section headers start in column 1; data lines start with whitespace. Lines
whose first non-blank character is ``*`` are comments. Every rejected input
raises MpsParseError with the 1-based line and column of the offending token.

Conventions where MPS dialects disagree:

- default bounds are [0, +inf) for every column, including integer columns
  opened by an INTORG marker
- an UP bound below zero on a continuous column without an LO bound sets the
  lower bound to -inf (with a warning); on an integer column the lower bound
  stays 0, so the bounds are inverted and the file is rejected
- only the first N row is the objective; further N rows are ignored
- only the first RHS, RANGES and BOUNDS set is used
- an RHS entry on the objective row sets objective_constant = -value
- magnitudes >= 1e30 are infinite
"""

import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from reoptbench.errors import MpsParseError, RunIOError, StructuralError
from reoptbench.model.instance import Instance, Row, Sense, VarKind, Variable
from reoptbench.mps.dialect import FIXED_FIELDS, FREE, MpsDialect
from reoptbench.utils.text import parse_real

logger = logging.getLogger(__name__)

Token = Tuple[str, int]

_TOKEN = re.compile(r"\S+")

# OBJSENSE may appear anywhere before ENDATA and is not ranked
_SECTION_RANK = {"NAME": 0, "ROWS": 1, "COLUMNS": 2, "RHS": 3, "RANGES": 4, "BOUNDS": 5, "ENDATA": 6}
_SECTIONS = set(_SECTION_RANK) | {"OBJSENSE"}

_ROW_CODES = {"N", "L", "G", "E"}
_VALUE_BOUNDS = {"UP", "LO", "FX", "UI", "LI"}
_FLAG_BOUNDS = {"FR", "MI", "PL", "BV"}
_SENSES = {
    "MIN": Sense.MINIMIZE,
    "MINIMIZE": Sense.MINIMIZE,
    "MAX": Sense.MAXIMIZE,
    "MAXIMIZE": Sense.MAXIMIZE,
}


class MpsReader:
    """Parses MPS text into an Instance and keeps the warnings of the last parse."""

    def __init__(self, dialect: MpsDialect = FREE):
        self.dialect = dialect
        self.warnings: List[str] = []

    def _warn(self, message: str) -> None:
        self.warnings.append(message)
        logger.warning(message)

    def _reset(self) -> None:
        self.warnings = []
        self.name = ""
        self.sense = Sense.MINIMIZE
        self.sense_seen = False

        self.objective_name: Optional[str] = None
        self.objective_constant = 0.0
        self.ignored_rows: Set[str] = set()

        self.row_index: Dict[str, int] = {}
        self.row_names: List[str] = []
        self.row_codes: List[str] = []
        self.row_lines: List[int] = []
        self.row_coefficients: List[Dict[int, float]] = []

        self.col_index: Dict[str, int] = {}
        self.col_names: List[str] = []
        self.col_kinds: List[VarKind] = []
        self.col_lower: List[float] = []
        self.col_upper: List[float] = []
        self.col_objective: List[float] = []
        self.col_lower_set: List[bool] = []
        self.col_lines: List[int] = []

        self.in_integer_block = False
        self.current_column: Optional[int] = None
        self.current_column_rows: Set[str] = set()

        self.rhs: Dict[str, Tuple[float, int, int]] = {}
        self.ranges: Dict[str, Tuple[float, int, int]] = {}
        self.sets: Dict[str, Optional[str]] = {}
        self.skipped_sets: Set[Tuple[str, str]] = set()

    def parse(self, text: str) -> Instance:
        """Parse MPS text.

        Args:
            text: Full file contents
        Returns:
            Parsed Instance, variables and rows in file order
        Raises:
            MpsParseError: on any malformed or unsupported input
        """
        self._reset()
        section: Optional[str] = None
        rank = -1
        seen_sections: Set[str] = set()
        lineno = 0

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip("\r\n")
            stripped = line.strip()
            if not stripped or stripped.startswith("*"):
                continue

            if not line[0].isspace():
                section, rank = self._section_header(line, lineno, rank, seen_sections)
                if section == "ENDATA":
                    return self._build()
                continue

            tokens = self._tokens(line)
            if section is None:
                raise MpsParseError(lineno, tokens[0][1], "data line outside of any section")
            handler = getattr(self, f"_line_{section.lower()}")
            handler(tokens, lineno)

        raise MpsParseError(lineno + 1, 1, "missing ENDATA")

    # -- lexical -----------------------------------------------------------

    def _tokens(self, line: str) -> List[Token]:
        if not self.dialect.is_fixed:
            return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]
        tokens = []
        for start, width in FIXED_FIELDS:
            chunk = line[start - 1:start - 1 + width]
            value = chunk.strip()
            if value:
                tokens.append((value, start + len(chunk) - len(chunk.lstrip())))
        return tokens

    def _number(self, token: Token, lineno: int) -> float:
        text, col = token
        try:
            return parse_real(text)
        except ValueError:
            raise MpsParseError(lineno, col, f"invalid number '{text}'")

    def _section_header(self, line: str, lineno: int, rank: int, seen: Set[str]) -> Tuple[str, int]:
        tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]
        keyword = tokens[0][0].upper()
        if keyword not in _SECTIONS:
            raise MpsParseError(lineno, 1, f"unknown section '{tokens[0][0]}'")
        if keyword in seen:
            raise MpsParseError(lineno, 1, f"section {keyword} appears twice")
        seen.add(keyword)

        if keyword == "NAME":
            if rank >= 0:
                raise MpsParseError(lineno, 1, "NAME must be the first section")
            self.name = line[4:].strip()
            return keyword, 0

        if keyword == "OBJSENSE":
            if len(tokens) > 2:
                raise MpsParseError(lineno, tokens[2][1], "unexpected text after OBJSENSE")
            if len(tokens) == 2:
                self._set_sense(tokens[1], lineno)
            return keyword, rank

        if len(tokens) > 1:
            # free-format RHS/RANGES/BOUNDS headers occasionally carry a set name; not supported
            raise MpsParseError(lineno, tokens[1][1], f"unexpected text after {keyword}")
        new_rank = _SECTION_RANK[keyword]
        if new_rank < rank:
            raise MpsParseError(lineno, 1, f"section {keyword} out of order")
        if keyword == "COLUMNS" and "ROWS" not in seen:
            raise MpsParseError(lineno, 1, "COLUMNS before ROWS")
        return keyword, new_rank

    def _set_sense(self, token: Token, lineno: int) -> None:
        text, col = token
        sense = _SENSES.get(text.upper())
        if sense is None:
            raise MpsParseError(lineno, col, f"unknown objective sense '{text}'")
        if self.sense_seen:
            raise MpsParseError(lineno, col, "objective sense given twice")
        self.sense_seen = True
        if self.dialect.objective_sense_section_honored:
            self.sense = sense
        else:
            self._warn(f"line {lineno}: OBJSENSE {text} ignored by dialect; minimizing")

    # -- sections ----------------------------------------------------------

    def _line_name(self, tokens: List[Token], lineno: int) -> None:
        raise MpsParseError(lineno, tokens[0][1], "unexpected data line in NAME section")

    def _line_objsense(self, tokens: List[Token], lineno: int) -> None:
        if len(tokens) != 1:
            raise MpsParseError(lineno, tokens[-1][1], "OBJSENSE expects a single MIN or MAX")
        self._set_sense(tokens[0], lineno)

    def _line_rows(self, tokens: List[Token], lineno: int) -> None:
        if len(tokens) != 2:
            raise MpsParseError(lineno, tokens[0][1], "ROWS entry must be '<type> <name>'")
        (code, code_col), (name, name_col) = tokens
        code = code.upper()
        if code not in _ROW_CODES:
            raise MpsParseError(lineno, code_col, f"unknown row type '{code}'")
        if name in self.row_index or name == self.objective_name or name in self.ignored_rows:
            raise MpsParseError(lineno, name_col, f"duplicate row name '{name}'")

        if code == "N":
            if self.objective_name is None:
                self.objective_name = name
            else:
                self.ignored_rows.add(name)
                self._warn(f"line {lineno}: extra objective row '{name}' ignored")
            return

        self.row_index[name] = len(self.row_names)
        self.row_names.append(name)
        self.row_codes.append(code)
        self.row_lines.append(lineno)
        self.row_coefficients.append({})

    def _line_columns(self, tokens: List[Token], lineno: int) -> None:
        if len(tokens) >= 3 and tokens[1][0].upper() == "'MARKER'":
            marker, col = tokens[2]
            marker = marker.upper()
            if marker == "'INTORG'":
                self.in_integer_block = True
            elif marker == "'INTEND'":
                self.in_integer_block = False
            else:
                raise MpsParseError(lineno, col, f"unknown marker {tokens[2][0]}")
            return

        if len(tokens) not in (3, 5):
            raise MpsParseError(lineno, tokens[0][1], "COLUMNS entry must be '<column> <row> <value> [<row> <value>]'")

        name, name_col = tokens[0]
        if self.current_column is None or self.col_names[self.current_column] != name:
            if name in self.col_index:
                raise MpsParseError(lineno, name_col, f"column '{name}' is not contiguous (duplicate column name)")
            self._declare_column(name, lineno)

        j = self.current_column
        pairs = [(tokens[1], tokens[2])]
        if len(tokens) == 5:
            pairs.append((tokens[3], tokens[4]))
        for (row, row_col), value_token in pairs:
            if row in self.current_column_rows:
                raise MpsParseError(lineno, row_col, f"duplicate entry for column '{name}' in row '{row}'")
            self.current_column_rows.add(row)
            value = self._number(value_token, lineno)
            if not math.isfinite(value):
                raise MpsParseError(lineno, value_token[1], "matrix and objective coefficients must be finite")

            if row == self.objective_name:
                self.col_objective[j] = value
            elif row in self.ignored_rows:
                continue
            elif row in self.row_index:
                if value != 0.0:
                    self.row_coefficients[self.row_index[row]][j] = value
            else:
                raise MpsParseError(lineno, row_col, f"unknown row '{row}'")

    def _declare_column(self, name: str, lineno: int) -> None:
        self.current_column = len(self.col_names)
        self.current_column_rows = set()
        self.col_index[name] = self.current_column
        self.col_names.append(name)
        self.col_kinds.append(VarKind.GENERAL_INTEGER if self.in_integer_block else VarKind.CONTINUOUS)
        self.col_lower.append(0.0)
        self.col_upper.append(math.inf)
        self.col_objective.append(0.0)
        self.col_lower_set.append(False)
        self.col_lines.append(lineno)

    def _set_name_ok(self, section: str, set_name: Optional[str], lineno: int) -> bool:
        """True if the entry belongs to the first set used in this section."""
        if section not in self.sets:
            self.sets[section] = set_name
            return True
        if self.sets[section] == set_name:
            return True
        key = (section, set_name or "")
        if key not in self.skipped_sets:
            self.skipped_sets.add(key)
            self._warn(f"line {lineno}: {section} set '{set_name}' ignored; only the first set is used")
        return False

    def _side_entries(self, section: str, tokens: List[Token], lineno: int) -> List[Tuple[Token, Token]]:
        if len(tokens) % 2 == 1:
            set_name = tokens[0][0]
            tokens = tokens[1:]
        else:
            set_name = None
        if len(tokens) not in (2, 4):
            raise MpsParseError(lineno, tokens[0][1] if tokens else 1, f"{section} entry must be '[<set>] <row> <value> [<row> <value>]'")
        if not self._set_name_ok(section, set_name, lineno):
            return []
        return [(tokens[k], tokens[k + 1]) for k in range(0, len(tokens), 2)]

    def _line_rhs(self, tokens: List[Token], lineno: int) -> None:
        for (row, row_col), value_token in self._side_entries("RHS", tokens, lineno):
            value = self._number(value_token, lineno)
            if row == self.objective_name:
                if not math.isfinite(value):
                    raise MpsParseError(lineno, value_token[1], "objective constant must be finite")
                self.objective_constant = -value
                continue
            if row in self.ignored_rows:
                continue
            if row not in self.row_index:
                raise MpsParseError(lineno, row_col, f"unknown row '{row}'")
            if row in self.rhs:
                raise MpsParseError(lineno, row_col, f"duplicate RHS entry for row '{row}'")
            self.rhs[row] = (value, lineno, value_token[1])

    def _line_ranges(self, tokens: List[Token], lineno: int) -> None:
        for (row, row_col), value_token in self._side_entries("RANGES", tokens, lineno):
            if row == self.objective_name or row in self.ignored_rows:
                raise MpsParseError(lineno, row_col, f"RANGES entry on objective row '{row}'")
            if row not in self.row_index:
                raise MpsParseError(lineno, row_col, f"unknown row '{row}'")
            if row in self.ranges:
                raise MpsParseError(lineno, row_col, f"duplicate RANGES entry for row '{row}'")
            self.ranges[row] = (self._number(value_token, lineno), lineno, value_token[1])

    def _line_bounds(self, tokens: List[Token], lineno: int) -> None:
        code, code_col = tokens[0]
        code = code.upper()
        rest = tokens[1:]

        if code in _VALUE_BOUNDS:
            if len(rest) == 3:
                set_name, column, value_token = rest[0][0], rest[1], rest[2]
            elif len(rest) == 2:
                set_name, column, value_token = None, rest[0], rest[1]
            else:
                raise MpsParseError(lineno, code_col, f"{code} bound must be '{code} [<set>] <column> <value>'")
        elif code in _FLAG_BOUNDS:
            value_token = None
            if len(rest) == 1:
                set_name, column = None, rest[0]
            elif len(rest) == 2 and rest[1][0] in self.col_index:
                set_name, column = rest[0][0], rest[1]
            elif len(rest) == 2 and code == "BV" and rest[0][0] in self.col_index:
                set_name, column = None, rest[0]
            elif len(rest) == 3 and code == "BV":
                set_name, column = rest[0][0], rest[1]
            elif len(rest) == 2:
                set_name, column = rest[0][0], rest[1]
            else:
                raise MpsParseError(lineno, code_col, f"{code} bound must be '{code} [<set>] <column>'")
        else:
            raise MpsParseError(lineno, code_col, f"unknown bound type '{tokens[0][0]}'")

        if not self._set_name_ok("BOUNDS", set_name, lineno):
            return
        name, name_col = column
        if name not in self.col_index:
            raise MpsParseError(lineno, name_col, f"unknown column '{name}'")
        j = self.col_index[name]
        self.col_lines[j] = lineno
        value = self._number(value_token, lineno) if value_token is not None else None

        if code == "UP" or code == "UI":
            if code == "UI" and self.col_kinds[j] is VarKind.CONTINUOUS:
                self.col_kinds[j] = VarKind.GENERAL_INTEGER
            self.col_upper[j] = value
            if value < 0 and not self.col_lower_set[j] and self.col_kinds[j] is VarKind.CONTINUOUS:
                self.col_lower[j] = -math.inf
                self._warn(f"line {lineno}: negative upper bound on '{name}' without LO; lower bound set to -inf")
        elif code == "LO" or code == "LI":
            if code == "LI" and self.col_kinds[j] is VarKind.CONTINUOUS:
                self.col_kinds[j] = VarKind.GENERAL_INTEGER
            self.col_lower[j] = value
            self.col_lower_set[j] = True
        elif code == "FX":
            if not math.isfinite(value):
                raise MpsParseError(lineno, value_token[1], "FX bound must be finite")
            self.col_lower[j] = self.col_upper[j] = value
            self.col_lower_set[j] = True
        elif code == "FR":
            self.col_lower[j] = -math.inf
            self.col_upper[j] = math.inf
            self.col_lower_set[j] = True
        elif code == "MI":
            self.col_lower[j] = -math.inf
            self.col_lower_set[j] = True
        elif code == "PL":
            self.col_upper[j] = math.inf
        elif code == "BV":
            self.col_kinds[j] = VarKind.BINARY
            self.col_lower[j] = 0.0
            self.col_upper[j] = 1.0
            self.col_lower_set[j] = True

    # -- assembly ----------------------------------------------------------

    def _row_sides(self, i: int) -> Tuple[float, float, int, int]:
        name, code = self.row_names[i], self.row_codes[i]
        value, line, col = self.rhs.get(name, (0.0, self.row_lines[i], 1))
        if code == "L":
            lhs, rhs = -math.inf, value
        elif code == "G":
            lhs, rhs = value, math.inf
        else:
            if not math.isfinite(value):
                raise MpsParseError(line, col, f"equality row '{name}' needs a finite right-hand side")
            lhs = rhs = value

        if name in self.ranges:
            r, line, col = self.ranges[name]
            if code == "L":
                lhs = rhs - abs(r)
            elif code == "G":
                rhs = lhs + abs(r)
            elif r > 0:
                rhs = value + r
            elif r < 0:
                lhs = value + r
        return lhs, rhs, line, col

    def _build(self) -> Instance:
        variables = []
        for j, name in enumerate(self.col_names):
            try:
                variables.append(Variable(
                    name=name,
                    kind=self.col_kinds[j],
                    lower=self.col_lower[j],
                    upper=self.col_upper[j],
                    objective_coefficient=self.col_objective[j],
                ))
            except StructuralError as e:
                raise MpsParseError(self.col_lines[j], 1, f"bounds inverted or invalid: {e}")

        rows = []
        for i, name in enumerate(self.row_names):
            lhs, rhs, line, col = self._row_sides(i)
            try:
                rows.append(Row(
                    name=name,
                    coefficients=tuple(self.row_coefficients[i].items()),
                    lhs=lhs,
                    rhs=rhs,
                ))
            except StructuralError as e:
                raise MpsParseError(line, col, str(e))

        objective_name = self.objective_name
        if objective_name is None:
            objective_name = "OBJ"
            while objective_name in self.row_index:
                objective_name += "_"

        return Instance(
            name=self.name,
            variables=tuple(variables),
            rows=tuple(rows),
            sense=self.sense,
            objective_constant=self.objective_constant,
            objective_name=objective_name,
        )


def parse_mps(text: str, dialect: MpsDialect = FREE) -> Instance:
    """Parse MPS text into an Instance (warnings go to the module logger)."""
    return MpsReader(dialect).parse(text)


def read_mps_file(path: Path, dialect: MpsDialect = FREE) -> Instance:
    """Read an MPS file; the file stem names instances without a NAME."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise RunIOError(path, f"cannot read MPS file: {e}")
    instance = parse_mps(text, dialect)
    if not instance.name:
        instance = instance.replace(name=path.stem)
    return instance
