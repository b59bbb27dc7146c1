"""Reader and writer for ``.sgn`` files.

The grammar is LL(1) and parsed by hand.  Parsing happens in two passes:
the parser turns tokens into raw blocks, then the resolver links names
(systems, morphisms, configurations) and builds domain objects, so blocks may
refer to blocks defined later in the file or in imported files.  Every
problem becomes a :class:`Diagnostic`; parsing never raises.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

from .errors import Diagnostic, EngineError
from .lifecycle_sim.scenario import (
    AgentSpec,
    EnvironmentalExpectation,
    EnvironmentProfile,
    ExpectationUpdate,
    FunctionalExpectation,
    ProductSpec,
    Scenario,
    validate_scenario,
)
from .morphism import SemioticMorphism
from .semiosis import (
    Branch,
    MorphismStep,
    SemiosisSequence,
    Selection,
    Variation,
    make_component,
    make_sequence,
)
from .sign_algebra import (
    DATA,
    ENVIRONMENT,
    PRODUCT,
    WILDCARD,
    AtMost,
    Configuration,
    Constraint,
    ConstructorDecl,
    Fact,
    Forbid,
    Lit,
    RelationDecl,
    Require,
    SignSystem,
    Term,
    Var,
    data_sort,
    sign_sort,
    validate_config,
    validate_system,
)

KEYWORDS = frozenset("""
import system data sort ctor rel axiom rank forbid require atmost
morphism config of sequence component t from vary depth budget select min apply branch p
scenario env product features rate in manufacturer params agent for weber window expect
functional adapt on off cluster tau every update at
""".split())

BLOCK_STARTERS = frozenset({"import", "system", "morphism", "config", "sequence", "scenario"})
MAX_NESTING = 100

_TOKEN_RE = re.compile(r"""
  (?P<ws>[ \t\r\n]+)
| (?P<comment>//[^\n]*)
| (?P<real>-?\d+\.\d+(?:[eE][+-]?\d+)?|-?\d+[eE][+-]?\d+)
| (?P<int>-?\d+)
| (?P<string>"(?:[^"\\\n]|\\.)*")
| (?P<at>@[A-Za-z_][A-Za-z0-9_]*)
| (?P<id>[A-Za-z_][A-Za-z0-9_]*)
| (?P<arrow>->)
| (?P<dotdot>\.\.)
| (?P<punct>[{}()\[\];:,=<*])
""", re.VERBOSE | re.ASCII)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z", re.ASCII)


@dataclass(frozen=True)
class Token:
    kind: str  # id, kw, int, real, string, at, punct, eof
    value: object
    line: int
    col: int

    @property
    def loc(self):
        return (self.line, self.col)

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of file"
        if self.kind == "string":
            return "string literal"
        return repr(str(self.value))


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens, diags = [], []
    pos, n = 0, len(text)
    line, line_start = 1, 0
    match = _TOKEN_RE.match
    while pos < n:
        m = match(text, pos)
        col = pos - line_start + 1
        if m is None:
            if text[pos] == '"':
                end = text.find("\n", pos)
                end = n if end < 0 else end
                diags.append(Diagnostic("UNTERMINATED_STRING", "string literal is not closed", line, col))
                pos = end
            else:
                if text[pos] == "\n":  # not reachable through ws, kept for safety
                    line, line_start = line + 1, pos + 1
                diags.append(Diagnostic("UNEXPECTED_CHAR", f"unexpected character {text[pos]!r}", line, col))
                pos += 1
            continue
        kind, raw = m.lastgroup, m.group()
        pos = m.end()
        if kind == "ws":
            nl = raw.count("\n")
            if nl:
                line += nl
                line_start = m.start() + raw.rindex("\n") + 1
            continue
        if kind == "comment":
            continue
        if kind == "id":
            tokens.append(Token("kw" if raw in KEYWORDS else "id", raw, line, col))
        elif kind == "int":
            tokens.append(Token("int", int(raw), line, col))
        elif kind == "real":
            value = float(raw)
            if not math.isfinite(value):
                diags.append(Diagnostic("NUMBER_RANGE", f"number {raw} is out of range", line, col))
                value = 0.0
            tokens.append(Token("real", value, line, col))
        elif kind == "at":
            tokens.append(Token("at", raw, line, col))
        elif kind == "string":
            try:
                value = json.loads(raw)
            except ValueError:
                diags.append(Diagnostic("BAD_STRING", "invalid escape in string literal", line, col))
                value = raw[1:-1]
            tokens.append(Token("string", value, line, col))
        else:
            tokens.append(Token("punct", raw, line, col))
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens, diags


# -- raw blocks -----------------------------------------------------------------


@dataclass
class _Ref:
    name: str
    loc: tuple


@dataclass
class RawBroken:
    """A block whose name was read before a syntax error."""

    kind: str
    name: str


@dataclass
class RawImport:
    path: str
    loc: tuple


@dataclass
class RawSystem:
    name: str
    loc: tuple
    sorts: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    ctors: list = field(default_factory=list)
    rels: list = field(default_factory=list)
    axioms: list = field(default_factory=list)
    sort_refs: dict = field(default_factory=dict)  # (decl loc, sort name) -> token loc


@dataclass
class RawMorphism:
    name: str
    loc: tuple
    source: _Ref
    target: _Ref
    maps: list = field(default_factory=list)  # (kind, src, tgt, loc)


@dataclass
class RawConfig:
    name: str
    loc: tuple
    system: _Ref
    terms: list = field(default_factory=list)  # (name, term, loc)
    facts: list = field(default_factory=list)  # (Fact, loc)


@dataclass
class RawComponent:
    t1: int
    t2: int
    loc: tuple
    source: _Ref
    steps: list = field(default_factory=list)  # Variation | Selection | _Ref (apply)
    branches: list = field(default_factory=list)  # (morph _Ref, p, target _Ref)


@dataclass
class RawSequence:
    name: str
    loc: tuple
    components: list = field(default_factory=list)


@dataclass
class RawScenario:
    name: str
    loc: tuple
    envs: list = field(default_factory=list)
    products: list = field(default_factory=list)  # (id, cfg _Ref, env, manufacturer, params, loc)
    agents: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    adapt: bool = False
    tau: float = 1.0
    every: int = 0


class _SyntaxError(Exception):
    def __init__(self, diag):
        super().__init__(diag.message)
        self.diag = diag


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.diags: list[Diagnostic] = []

    # token helpers

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, msg, tok=None, code="SYNTAX_ERROR"):
        tok = tok or self.cur
        raise _SyntaxError(Diagnostic(code, msg, tok.line, tok.col))

    def is_punct(self, p) -> bool:
        return self.cur.kind == "punct" and self.cur.value == p

    def is_kw(self, w) -> bool:
        return self.cur.kind == "kw" and self.cur.value == w

    def punct(self, p) -> Token:
        if not self.is_punct(p):
            self.error(f"expected {p!r}, found {self.cur.describe()}")
        return self.advance()

    def kw(self, w) -> Token:
        if not self.is_kw(w):
            self.error(f"expected {w!r}, found {self.cur.describe()}")
        return self.advance()

    def ident(self, what="identifier") -> Token:
        if self.cur.kind == "kw":
            self.error(f"{self.cur.value!r} is a reserved keyword, expected {what}",
                       code="RESERVED_KEYWORD")
        if self.cur.kind != "id":
            self.error(f"expected {what}, found {self.cur.describe()}")
        return self.advance()

    def integer(self) -> int:
        if self.cur.kind != "int":
            self.error(f"expected integer, found {self.cur.describe()}")
        return self.advance().value

    def number(self) -> float:
        if self.cur.kind not in ("int", "real"):
            self.error(f"expected number, found {self.cur.describe()}")
        return float(self.advance().value)

    def ref(self, what) -> _Ref:
        tok = self.ident(what)
        return _Ref(tok.value, tok.loc)

    # top level

    def parse_file(self) -> list:
        blocks = []
        while self.cur.kind != "eof":
            start = self.i
            try:
                blocks.append(self.block())
            except _SyntaxError as e:
                self.diags.append(e.diag)
                head, name = self.toks[start], self.toks[start + 1] if start + 1 < len(self.toks) else None
                if head.kind == "kw" and head.value in KINDS and name is not None and name.kind == "id":
                    blocks.append(RawBroken(head.value, name.value))
                self.recover(start)
        return blocks

    def recover(self, start):
        # resume at the next block keyword outside braces
        depth = 0
        for j in range(start, self.i):
            t = self.toks[j]
            if t.kind == "punct":
                depth += {"{": 1, "}": -1}.get(t.value, 0)
        if self.i == start:
            self.advance()
        while self.cur.kind != "eof":
            t = self.cur
            if t.kind == "kw" and t.value in BLOCK_STARTERS and depth <= 0:
                return
            if t.kind == "punct" and t.value in "{}":
                depth += 1 if t.value == "{" else -1
                self.advance()
                if depth == 0 and t.value == "}":
                    return
                continue
            self.advance()

    def block(self):
        tok = self.cur
        if tok.kind == "kw":
            handler = {
                "import": self.import_, "system": self.system, "morphism": self.morphism,
                "config": self.config, "sequence": self.sequence, "scenario": self.scenario,
            }.get(tok.value)
            if handler:
                return handler()
        self.error(f"expected a block (system, morphism, config, sequence, scenario or import), "
                   f"found {tok.describe()}")

    def import_(self):
        loc = self.kw("import").loc
        if self.cur.kind != "string":
            self.error(f"expected file name string, found {self.cur.describe()}")
        path = self.advance().value
        self.punct(";")
        return RawImport(path, loc)

    # systems

    def system(self) -> RawSystem:
        loc = self.kw("system").loc
        sys = RawSystem(self.ident("system name").value, loc)
        self.punct("{")
        while not self.is_punct("}"):
            self.decl(sys)
        self.punct("}")
        return sys

    def decl(self, sys: RawSystem):
        tok = self.cur
        if self.is_kw("data"):
            self.advance()
            name = self.ident("sort name").value
            self.punct(";")
            sys.sorts.append(data_sort(name, tok.loc))
        elif self.is_kw("sort"):
            self.advance()
            name = self.ident("sort name").value
            boundary = PRODUCT
            if self.is_punct("["):
                self.advance()
                if self.is_kw("product"):
                    self.advance()
                elif self.is_kw("env"):
                    self.advance()
                    boundary = ENVIRONMENT
                else:
                    self.error(f"expected 'product' or 'env', found {self.cur.describe()}")
                self.punct("]")
            while self.is_punct("<"):
                self.advance()
                sup = self.ident("sort name")
                sys.edges.append((name, sup.value, sup.loc))
                sys.sort_refs.setdefault((tok.loc, sup.value), sup.loc)
            self.punct(";")
            sys.sorts.append(sign_sort(name, boundary, tok.loc))
        elif self.is_kw("ctor"):
            self.advance()
            name = self.ident("constructor name").value
            self.punct("(")
            args = self.sort_list(sys, tok.loc, allow_empty=True)
            self.punct(")")
            self.arrow()
            rtok = self.ident("result sort")
            result = rtok.value
            sys.sort_refs.setdefault((tok.loc, result), rtok.loc)
            level = self.at_int("@level")
            prio = 0
            if self.cur.kind == "at" and self.cur.value == "@prio":
                prio = self.at_int("@prio")
            self.punct(";")
            sys.ctors.append(ConstructorDecl(name, args, result, level, prio, tok.loc))
        elif self.is_kw("rel"):
            self.advance()
            name = self.ident("relation name").value
            self.punct("(")
            args = self.sort_list(sys, tok.loc, allow_empty=False)
            self.punct(")")
            self.punct(";")
            sys.rels.append(RelationDecl(name, args, tok.loc))
        elif self.is_kw("axiom"):
            self.advance()
            name = self.ident("axiom name").value
            self.punct(":")
            self.kw("rank")
            rank = self.integer()
            self.punct(":")
            body = self.axiom_body()
            self.punct(";")
            sys.axioms.append(Constraint(name, rank, body, tok.loc))
        else:
            self.error(f"expected a declaration (data, sort, ctor, rel, axiom), found {tok.describe()}")

    def at_int(self, word) -> int:
        if self.cur.kind != "at" or self.cur.value != word:
            self.error(f"expected {word!r}, found {self.cur.describe()}")
        self.advance()
        return self.integer()

    def sort_list(self, sys, decl_loc, allow_empty) -> list[str]:
        if allow_empty and self.is_punct(")"):
            return []
        out = []
        while True:
            tok = self.ident("sort name")
            sys.sort_refs.setdefault((decl_loc, tok.value), tok.loc)
            out.append(tok.value)
            if not self.is_punct(","):
                return out
            self.advance()

    def axiom_body(self):
        if self.is_kw("atmost"):
            self.advance()
            rel = self.ident("relation name").value
            return AtMost(rel, self.integer())
        if self.is_kw("forbid") or self.is_kw("require"):
            cls = Forbid if self.advance().value == "forbid" else Require
            rel = self.ident("relation name").value
            self.punct("(")
            atoms = [self.atom()]
            while self.is_punct(","):
                self.advance()
                atoms.append(self.atom())
            self.punct(")")
            return cls(rel, atoms)
        self.error(f"expected 'forbid', 'require' or 'atmost', found {self.cur.describe()}")

    def atom(self):
        if self.is_punct("*"):
            self.advance()
            return WILDCARD
        if self.cur.kind == "id" and not (self.toks[self.i + 1].kind == "punct"
                                          and self.toks[self.i + 1].value == "("):
            return Var(self.advance().value)
        return self.term(allow_refs=False)

    def term(self, allow_refs, depth=0):
        if depth > MAX_NESTING:
            self.error("term nesting is too deep", code="TOO_DEEP")
        tok = self.cur
        if tok.kind in ("int", "real", "string"):
            self.advance()
            return Lit(tok.value)
        name = self.ident("term")
        if not self.is_punct("("):
            if allow_refs:
                return _Ref(name.value, name.loc)
            self.error("variables are not allowed inside literal terms", name)
        self.advance()
        args = []
        if not self.is_punct(")"):
            args.append(self.term(allow_refs, depth + 1))
            while self.is_punct(","):
                self.advance()
                args.append(self.term(allow_refs, depth + 1))
        self.punct(")")
        return Term(name.value, args)

    # morphisms

    def morphism(self) -> RawMorphism:
        loc = self.kw("morphism").loc
        name = self.ident("morphism name").value
        self.punct(":")
        src = self.ref("system name")
        self.arrow()
        tgt = self.ref("system name")
        m = RawMorphism(name, loc, src, tgt)
        self.punct("{")
        while not self.is_punct("}"):
            tok = self.cur
            if not (tok.kind == "kw" and tok.value in ("sort", "ctor", "rel")):
                self.error(f"expected 'sort', 'ctor' or 'rel', found {tok.describe()}")
            self.advance()
            a = self.ident()
            self.arrow()
            b = self.ident()
            self.punct(";")
            m.maps.append((tok.value, a.value, b.value, (a.loc, b.loc)))
        self.punct("}")
        return m

    def arrow(self):
        if not (self.cur.kind == "punct" and self.cur.value == "->"):
            self.error(f"expected '->', found {self.cur.describe()}")
        self.advance()

    # configurations

    def config(self) -> RawConfig:
        loc = self.kw("config").loc
        name = self.ident("configuration name").value
        self.kw("of")
        cfg = RawConfig(name, loc, self.ref("system name"))
        self.punct("{")
        while not self.is_punct("}"):
            head = self.ident("term or relation name")
            if self.is_punct("="):
                self.advance()
                cfg.terms.append((head.value, self.term(allow_refs=True), head.loc))
            elif self.is_punct("("):
                self.advance()
                args = []
                if not self.is_punct(")"):
                    args.append(self.ident("term name").value)
                    while self.is_punct(","):
                        self.advance()
                        args.append(self.ident("term name").value)
                self.punct(")")
                cfg.facts.append((Fact(head.value, args), head.loc))
            else:
                self.error(f"expected '=' or '(', found {self.cur.describe()}")
            self.punct(";")
        self.punct("}")
        return cfg

    # sequences

    def sequence(self) -> RawSequence:
        loc = self.kw("sequence").loc
        seq = RawSequence(self.ident("sequence name").value, loc)
        self.punct("{")
        while not self.is_punct("}"):
            seq.components.append(self.component())
        self.punct("}")
        return seq

    def component(self) -> RawComponent:
        loc = self.kw("component").loc
        self.kw("t")
        t1 = self.integer()
        if not (self.cur.kind == "punct" and self.cur.value == ".."):
            self.error(f"expected '..', found {self.cur.describe()}")
        self.advance()
        t2 = self.integer()
        self.punct("{")
        self.kw("from")
        comp = RawComponent(t1, t2, loc, self.ref("configuration name"))
        self.punct(";")
        while not self.is_kw("branch"):
            tok = self.cur
            if self.is_kw("vary"):
                self.advance()
                self.kw("depth")
                depth = self.integer()
                self.kw("budget")
                comp.steps.append((Variation(depth, self.integer()), tok.loc))
            elif self.is_kw("select"):
                self.advance()
                minimal = self.is_kw("min")
                if minimal:
                    self.advance()
                comp.steps.append((Selection(minimal), tok.loc))
            elif self.is_kw("apply"):
                self.advance()
                comp.steps.append((self.ref("morphism name"), tok.loc))
            else:
                self.error(f"expected a step (vary, select, apply) or 'branch', found {tok.describe()}")
            self.punct(";")
        while self.is_kw("branch"):
            self.advance()
            m = self.ref("morphism name")
            self.kw("p")
            prob = self.number()
            self.arrow()
            comp.branches.append((m, prob, self.ref("system name")))
            self.punct(";")
        self.punct("}")
        return comp

    # scenarios

    def scenario(self) -> RawScenario:
        loc = self.kw("scenario").loc
        sc = RawScenario(self.ident("scenario name").value, loc)
        self.punct("{")
        while not self.is_punct("}"):
            tok = self.cur
            if self.is_kw("env"):
                self.advance()
                env_id = self.ident("environment id").value
                self.kw("features")
                feats = self.number_list()
                rates = []
                while self.is_kw("rate"):
                    self.advance()
                    kind = self.ident("event kind").value
                    rates.append((kind, self.number()))
                sc.envs.append(EnvironmentProfile(env_id, feats, rates, tok.loc))
            elif self.is_kw("product"):
                self.advance()
                pid = self.ident("product id").value
                self.kw("of")
                cfg = self.ref("configuration name")
                self.kw("in")
                env = self.ident("environment id").value
                self.kw("manufacturer")
                manu = self.ident("manufacturer id").value
                params = []
                if self.is_kw("params"):
                    self.advance()
                    self.punct("(")
                    if not self.is_punct(")"):
                        params.append(self.param())
                        while self.is_punct(","):
                            self.advance()
                            params.append(self.param())
                    self.punct(")")
                sc.products.append((pid, cfg, env, manu, params, tok.loc))
            elif self.is_kw("agent"):
                self.advance()
                self.kw("for")
                pid = self.ident("product id").value
                self.kw("weber")
                k = self.number()
                self.kw("window")
                window = self.integer()
                sc.agents.append(AgentSpec(pid, k, window, self.expectations(), tok.loc))
            elif self.is_kw("update"):
                self.advance()
                self.kw("at")
                tick = self.integer()
                self.kw("for")
                pid = self.ident("product id").value
                sc.updates.append(ExpectationUpdate(tick, pid, self.expectations(), tok.loc))
            elif self.is_kw("adapt"):
                self.advance()
                if self.is_kw("on") or self.is_kw("off"):
                    sc.adapt = self.advance().value == "on"
                else:
                    self.error(f"expected 'on' or 'off', found {self.cur.describe()}")
            elif self.is_kw("cluster"):
                self.advance()
                self.kw("tau")
                sc.tau = self.number()
                if self.is_kw("every"):
                    self.advance()
                    sc.every = self.integer()
            else:
                self.error(f"expected env, product, agent, update, adapt or cluster, "
                           f"found {tok.describe()}")
            self.punct(";")
        self.punct("}")
        return sc

    def param(self):
        name = self.ident("parameter name").value
        self.punct("=")
        return (name, self.number())

    def number_list(self) -> list[float]:
        self.punct("[")
        out = []
        if not self.is_punct("]"):
            out.append(self.number())
            while self.is_punct(","):
                self.advance()
                out.append(self.number())
        self.punct("]")
        return out

    def band(self):
        lo_hi = self.number_list()
        if len(lo_hi) != 2:
            self.error("expected a band [low, high]")
        return lo_hi

    def expectations(self) -> list:
        out = []
        while self.is_kw("expect"):
            self.advance()
            if self.is_kw("functional"):
                self.advance()
                name = self.ident("parameter name").value
                out.append(FunctionalExpectation(name, *self.band()))
            elif self.is_kw("env"):
                self.advance()
                kind = self.ident("event kind").value
                out.append(EnvironmentalExpectation(kind, *self.band()))
            else:
                self.error(f"expected 'functional' or 'env', found {self.cur.describe()}")
        return out


# -- resolution -----------------------------------------------------------------

KINDS = ("system", "morphism", "config", "sequence", "scenario")


@dataclass
class SourceFile:
    path: str | None
    text: str
    blocks: list
    diagnostics: list[Diagnostic]
    namespace: dict = field(default_factory=lambda: {k: {} for k in KINDS})
    origins: dict = field(default_factory=dict, repr=False)

    def get(self, kind: str, name: str):
        return self.namespace[kind].get(name)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


class _Loader:
    def __init__(self):
        self.cache: dict[str, SourceFile] = {}

    def load_path(self, path: str, stack: tuple = ()) -> SourceFile:
        key = os.path.abspath(path)
        if key in self.cache:
            return self.cache[key]
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as e:
            sf = SourceFile(path, "", [], [Diagnostic("IO_ERROR", f"cannot read {path}: "
                                                      f"{e.strerror or e}", path=str(path))])
            self.cache[key] = sf
            return sf
        sf = self.load_bytes(data, path, stack + (key,))
        self.cache[key] = sf
        return sf

    def load_bytes(self, data: bytes, path, stack) -> SourceFile:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            return SourceFile(path, "", [], [Diagnostic(
                "ENCODING", f"file is not valid UTF-8 (byte {e.start})", path=path)])
        return self.load_text(text, path, stack)

    def load_text(self, text: str, path, stack) -> SourceFile:
        tokens, diags = tokenize(text)
        parser = _Parser(tokens)
        raw = parser.parse_file()
        diags += parser.diags
        res = _Resolver(self, path, stack)
        try:
            blocks = res.run(raw)
        except (EngineError, ValueError, TypeError, KeyError) as e:  # defensive: never abort
            blocks = []
            res.diags.append(Diagnostic("INTERNAL_ERROR", f"resolver failure: {e!r}"))
        diags += res.diags
        if path is not None:
            diags = [d.in_file(path) for d in diags]
        diags.sort(key=lambda d: (d.path or "", d.line or 0, d.column or 0))
        return SourceFile(path, text, blocks, diags + res.imported_diags, res.ns, res.origin)


class _Resolver:
    def __init__(self, loader: _Loader, path, stack):
        self.loader = loader
        self.path = path
        self.stack = stack
        self.ns = {k: {} for k in KINDS}
        self.origin: dict[tuple[str, str], str | None] = {}
        self.failed = {k: set() for k in KINDS}
        self.bad_configs: set[str] = set()
        self.diags: list[Diagnostic] = []
        self.imported_diags: list[Diagnostic] = []

    def report(self, code, msg, loc=None):
        self.diags.append(Diagnostic(code, msg).at(loc))

    def lookup(self, kind, ref: _Ref, code):
        obj = self.ns[kind].get(ref.name)
        if obj is None and ref.name not in self.failed[kind]:
            self.report(code, f"unknown {kind} {ref.name!r}", ref.loc)
        return obj

    def define(self, kind, name, obj, loc, origin=None) -> bool:
        key = (kind, name)
        if name in self.ns[kind]:
            if origin is not None and self.origin.get(key) == origin:
                return False
            self.report("DUPLICATE_NAME", f"{kind} {name!r} is already defined", loc)
            return False
        self.ns[kind][name] = obj
        self.origin[key] = origin if origin is not None else os.path.abspath(self.path or "<input>")
        return True

    def run(self, raw: list) -> list:
        for b in raw:
            if isinstance(b, RawImport):
                self.do_import(b)
            elif isinstance(b, RawBroken):
                self.failed[b.kind].add(b.name)
        order = [RawSystem, RawMorphism, RawConfig, RawSequence, RawScenario]
        handlers = [self.build_system, self.build_morphism, self.build_config,
                    self.build_sequence, self.build_scenario]
        built = {}
        for cls, handler in zip(order, handlers):
            for idx, b in enumerate(raw):
                if isinstance(b, cls):
                    obj = handler(b)
                    if obj is not None:
                        built[idx] = obj
        return [built[i] for i in sorted(built)]

    def do_import(self, imp: RawImport):
        base = os.path.dirname(self.path) if self.path else os.getcwd()
        target = os.path.abspath(os.path.join(base, imp.path))
        if target in self.stack:
            self.report("IMPORT_CYCLE", f"import cycle through {imp.path!r}", imp.loc)
            return
        fresh = target not in self.loader.cache
        sf = self.loader.load_path(target, self.stack)
        if fresh:
            self.imported_diags += [d.in_file(target) for d in sf.diagnostics]
        if any(d.code == "IO_ERROR" for d in sf.diagnostics):
            self.report("IMPORT_ERROR", f"cannot import {imp.path!r}", imp.loc)
            return
        for kind in KINDS:
            for name, obj in sf.namespace[kind].items():
                self.define(kind, name, obj, imp.loc, sf.origins.get((kind, name), target))

    # builders

    def build_system(self, raw: RawSystem):
        sys = SignSystem(raw.name, raw.sorts, {(a, b) for a, b, _ in raw.edges}, raw.ctors,
                         raw.rels, raw.axioms, raw.loc)
        edge_locs = {}
        for a, b, loc in raw.edges:
            edge_locs.setdefault(a, loc)
            edge_locs.setdefault(b, loc)
        for d in validate_system(sys):
            if d.line is None:
                d = d.at(edge_locs.get(d.subject, raw.loc))
            elif d.code == "UNKNOWN_SORT":
                d = d.at(raw.sort_refs.get(((d.line, d.column), d.subject), (d.line, d.column)))
            self.diags.append(d)
        return sys if self.define("system", raw.name, sys, raw.loc) else None

    def build_morphism(self, raw: RawMorphism):
        src = self.lookup("system", raw.source, "UNKNOWN_SYSTEM")
        tgt = self.lookup("system", raw.target, "UNKNOWN_SYSTEM")
        if src is None or tgt is None:
            self.failed["morphism"].add(raw.name)
            return None
        maps = {"sort": {}, "ctor": {}, "rel": {}}
        ok = True
        for kind, a, b, (a_loc, b_loc) in raw.maps:
            sdecl = {"sort": src.sort_map, "ctor": src.ctor_map, "rel": src.rel_map}[kind]
            tdecl = {"sort": tgt.sort_map, "ctor": tgt.ctor_map, "rel": tgt.rel_map}[kind]
            code = {"sort": "UNKNOWN_SORT", "ctor": "UNKNOWN_CONSTRUCTOR",
                    "rel": "UNKNOWN_RELATION"}[kind]
            if a not in sdecl:
                self.report(code, f"{kind} {a!r} is not declared in {src.name}", a_loc)
                ok = False
            if b not in tdecl:
                self.report(code, f"{kind} {b!r} is not declared in {tgt.name}", b_loc)
                ok = False
            if a in maps[kind]:
                self.report("DUPLICATE_MAPPING", f"{kind} {a!r} is mapped twice", a_loc)
                ok = False
            maps[kind][a] = b
        if not ok:
            self.failed["morphism"].add(raw.name)
            return None
        m = SemioticMorphism(raw.name, src, tgt, maps["sort"], maps["ctor"], maps["rel"], raw.loc)
        return m if self.define("morphism", raw.name, m, raw.loc) else None

    def _resolve_term(self, term, env):
        if isinstance(term, _Ref):
            got = env.get(term.name)
            if got is None:
                self.report("UNKNOWN_TERM", f"unknown term {term.name!r}", term.loc)
            return got
        if isinstance(term, Lit):
            return term
        args = []
        for a in term.args:
            r = self._resolve_term(a, env)
            if r is None:
                return None
            args.append(r)
        return Term(term.ctor, args)

    def build_config(self, raw: RawConfig):
        sys = self.lookup("system", raw.system, "UNKNOWN_SYSTEM")
        if sys is None:
            self.failed["config"].add(raw.name)
            return None
        terms, locs = {}, {}
        for name, term, loc in raw.terms:
            if name in terms:
                self.report("DUPLICATE_TERM", f"term {name!r} is already defined", loc)
                continue
            resolved = self._resolve_term(term, terms)
            if resolved is not None:
                terms[name] = resolved
                locs[name] = loc
        facts = []
        for fact, loc in raw.facts:
            facts.append(fact)
            locs.setdefault(str(fact), loc)
        cfg = Configuration(raw.name, sys, terms, facts, raw.loc)
        problems = validate_config(cfg)
        for d in problems:
            self.diags.append(d.at(locs.get(d.subject, raw.loc)))
        if problems:
            self.bad_configs.add(raw.name)
        return cfg if self.define("config", raw.name, cfg, raw.loc) else None

    def build_sequence(self, raw: RawSequence):
        comps = []
        ok = True
        for rc in raw.components:
            cfg = self.lookup("config", rc.source, "UNKNOWN_CONFIG")
            steps = []
            for step, loc in rc.steps:
                if isinstance(step, _Ref):
                    m = self.lookup("morphism", step, "UNKNOWN_MORPHISM")
                    if m is None:
                        ok = False
                        continue
                    step = MorphismStep(m)
                steps.append(step)
            branches = []
            for mref, prob, tref in rc.branches:
                m = self.lookup("morphism", mref, "UNKNOWN_MORPHISM")
                tgt = self.lookup("system", tref, "UNKNOWN_SYSTEM")
                if m is None or tgt is None:
                    ok = False
                    continue
                branches.append(Branch(m, prob, tgt))
            if cfg is None or not ok:
                ok = False
                continue
            try:
                comps.append(make_component(cfg, steps, branches, rc.t1, rc.t2, rc.loc))
            except EngineError as e:
                self.report(e.code, e.message, rc.loc)
                ok = False
        if ok:
            try:
                seq = make_sequence(raw.name, comps, raw.loc)
            except EngineError as e:
                self.report(e.code, e.message, raw.loc)
                ok = False
        if not ok:
            self.failed["sequence"].add(raw.name)
            return None
        return seq if self.define("sequence", raw.name, seq, raw.loc) else None

    def build_scenario(self, raw: RawScenario):
        products = []
        ok = True
        for pid, cref, env, manu, params, loc in raw.products:
            cfg = self.lookup("config", cref, "UNKNOWN_CONFIG")
            if cfg is None:
                ok = False
                continue
            products.append(ProductSpec(pid, cfg, env, manu, params, loc))
        if not ok:
            self.failed["scenario"].add(raw.name)
            return None
        sc = Scenario(raw.name, raw.envs, products, raw.agents, raw.adapt, raw.tau, raw.every,
                      raw.updates, raw.loc)
        for d in validate_scenario(sc):
            if d.code == "INVALID_CONFIG":
                continue  # already reported on the configuration itself
            self.diags.append(d if d.line is not None else d.at(raw.loc))
        return sc if self.define("scenario", raw.name, sc, raw.loc) else None


def parse(text: str, path: str | None = None) -> tuple[list, list[Diagnostic]]:
    """Parse ``.sgn`` text; returns ``(blocks, diagnostics)``."""
    sf = load_text(text, path)
    return sf.blocks, sf.diagnostics


def load_text(text: str, path: str | None = None) -> SourceFile:
    stack = (os.path.abspath(path),) if path else ()
    return _Loader().load_text(text, path, stack)


def load_file(path) -> SourceFile:
    return _Loader().load_path(str(path))


def parse_bytes(data: bytes, path: str | None = None) -> tuple[list, list[Diagnostic]]:
    stack = (os.path.abspath(path),) if path else ()
    sf = _Loader().load_bytes(data, path, stack)
    return sf.blocks, sf.diagnostics


# -- serialization ----------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def _atom(a) -> str:
    return str(a)


def _serialize_system(sys: SignSystem) -> list[str]:
    lines = [f"system {sys.name} {{"]
    supers: dict[str, list[str]] = {}
    for a, b in sys.subsort_edges:
        supers.setdefault(a, []).append(b)
    for s in sys.sorts:
        if s.kind == DATA:
            lines.append(f"  data {s.name};")
            continue
        tag = " [env]" if s.boundary == ENVIRONMENT else ""
        ups = "".join(f" < {b}" for b in sorted(supers.get(s.name, ())))
        lines.append(f"  sort {s.name}{tag}{ups};")
    for c in sys.constructors:
        prio = f" @prio {c.priority}" if c.priority else ""
        lines.append(f"  ctor {c.name}({', '.join(c.arg_sorts)}) -> {c.result_sort} "
                     f"@level {c.level}{prio};")
    for r in sys.relations:
        lines.append(f"  rel {r.name}({', '.join(r.arg_sorts)});")
    for a in sys.constraints:
        body = a.body
        if isinstance(body, AtMost):
            text = f"atmost {body.relation} {body.count}"
        else:
            word = "forbid" if isinstance(body, Forbid) else "require"
            text = f"{word} {body.relation}({', '.join(_atom(x) for x in body.pattern)})"
        lines.append(f"  axiom {a.name}: rank {a.rank}: {text};")
    lines.append("}")
    return lines


def _serialize_morphism(m: SemioticMorphism) -> list[str]:
    lines = [f"morphism {m.name} : {m.source.name} -> {m.target.name} {{"]
    for kind, mapping in (("sort", m.sort_map), ("ctor", m.ctor_map), ("rel", m.rel_map)):
        for a, b in sorted(mapping.items()):
            lines.append(f"  {kind} {a} -> {b};")
    lines.append("}")
    return lines


def _serialize_config(cfg: Configuration) -> list[str]:
    lines = [f"config {cfg.name} of {cfg.system.name} {{"]
    for name, term in cfg.terms:
        lines.append(f"  {name} = {term};")
    for f in cfg.facts:
        lines.append(f"  {f.relation}({', '.join(f.args)});")
    lines.append("}")
    return lines


def _serialize_sequence(seq: SemiosisSequence) -> list[str]:
    lines = [f"sequence {seq.name} {{"]
    for c in seq.components:
        lines.append(f"  component t {c.t1}..{c.t2} {{")
        lines.append(f"    from {c.source_config.name};")
        for step in c.steps:
            if isinstance(step, Variation):
                lines.append(f"    vary depth {step.depth_bound} budget {step.relation_budget};")
            elif isinstance(step, Selection):
                lines.append("    select min;" if step.minimality else "    select;")
            else:
                lines.append(f"    apply {step.morphism.name};")
        for b in c.branches:
            lines.append(f"    branch {b.morphism.name} p {_num(b.probability)} -> {b.target.name};")
        lines.append("  }")
    lines.append("}")
    return lines


def _band(x) -> str:
    return f"[{_num(x.low)}, {_num(x.high)}]"


def _expectations(exps) -> str:
    parts = []
    for x in exps:
        if isinstance(x, FunctionalExpectation):
            parts.append(f" expect functional {x.param} {_band(x)}")
        else:
            parts.append(f" expect env {x.kind} {_band(x)}")
    return "".join(parts)


def _serialize_scenario(sc: Scenario) -> list[str]:
    lines = [f"scenario {sc.name} {{"]
    for e in sc.environments:
        feats = ", ".join(_num(x) for x in e.features)
        rates = "".join(f" rate {k} {_num(r)}" for k, r in e.base_rates)
        lines.append(f"  env {e.id} features [{feats}]{rates};")
    for p in sc.products:
        params = ", ".join(f"{k}={_num(v)}" for k, v in p.params)
        lines.append(f"  product {p.id} of {p.config.name} in {p.environment} "
                     f"manufacturer {p.manufacturer} params ({params});")
    for a in sc.agents:
        lines.append(f"  agent for {a.product} weber {_num(a.weber_k)} window {a.window}"
                     f"{_expectations(a.expectations)};")
    for u in sc.updates:
        lines.append(f"  update at {u.tick} for {u.product}{_expectations(u.expectations)};")
    lines.append(f"  adapt {'on' if sc.adapt else 'off'};")
    lines.append(f"  cluster tau {_num(sc.cluster_tau)} every {sc.cluster_every};")
    lines.append("}")
    return lines


def serialize(blocks) -> str:
    """Render blocks as ``.sgn`` text; ``parse(serialize(b))`` reproduces ``b``."""
    chunks = []
    for b in blocks:
        if isinstance(b, SignSystem):
            chunks.append(_serialize_system(b))
        elif isinstance(b, SemioticMorphism):
            chunks.append(_serialize_morphism(b))
        elif isinstance(b, Configuration):
            chunks.append(_serialize_config(b))
        elif isinstance(b, SemiosisSequence):
            chunks.append(_serialize_sequence(b))
        elif isinstance(b, Scenario):
            chunks.append(_serialize_scenario(b))
        else:
            raise TypeError(f"cannot serialize {type(b).__name__}")
    return "\n\n".join("\n".join(c) for c in chunks) + ("\n" if chunks else "")


def is_identifier(name: str) -> bool:
    return bool(IDENT_RE.match(name)) and name not in KEYWORDS
