"""Concrete syntax for .qccs program files.

A file holds up to six sections: registers, domains, channels, ops, defs,
checks. Quantum channels are written with an @ prefix; classical channels
name a finite domain. The defs section holds process equations; bodies can
reference constants defined later in the file (resolution is checked after
the whole file is read). See docs/qccs.md for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import quantum
from .bexp import (
    FALSE,
    TRUE,
    Add,
    BExp,
    Cmp,
    Exp,
    Imp,
    Lit,
    Mul,
    Sub,
    Var,
    band,
    bnot,
    bor,
)
from .syntax import (
    Action,
    CheckDirective,
    CIn,
    ConstCall,
    COut,
    If,
    Meas,
    Nil,
    OpDecl,
    Par,
    Prefix,
    ProcDef,
    Program,
    QIn,
    QOut,
    Relabel,
    Restrict,
    Sum,
    SuperOpApp,
    Tau,
    Term,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""(?P<ws>\s+|\#[^\n]*)
      | (?P<num>\d+)
      | (?P<qident>@[A-Za-z_][A-Za-z0-9_']*)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
      | (?P<str>"[^"\n]*")
      | (?P<sym><=|>=|->|\|\||[{}()\[\],;:=+*\-/?!.<>\\|])
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "registers", "domains", "channels", "ops", "defs", "checks",
    "if", "then", "tau", "nil", "set", "proj", "measure",
    "true", "false", "not", "and", "or",
}


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | qident | str | sym | eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        text = m.group(0)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.prog = Program()

    # -- token plumbing ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.tok.text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            self.fail(f"expected {what}, found {self.tok.text!r}")
        t = self.tok
        if t.text in _KEYWORDS:
            self.fail(f"keyword {t.text!r} cannot be used as {what}")
        self.i += 1
        return t.text

    def fail(self, msg: str):
        raise ParseError(msg, self.tok.line, self.tok.col)

    # -- sections ----------------------------------------------------------

    def program(self) -> Program:
        while self.tok.kind != "eof":
            t = self.tok
            if t.text == "registers":
                self.i += 1
                self.registers()
            elif t.text == "domains":
                self.i += 1
                self.domains()
            elif t.text == "channels":
                self.i += 1
                self.channels()
            elif t.text == "ops":
                self.i += 1
                self.ops()
            elif t.text == "defs":
                self.i += 1
                self.defs()
            elif t.text == "checks":
                self.i += 1
                self.checks()
            else:
                self.fail(f"expected a section keyword, found {t.text!r}")
        return self.prog

    def registers(self):
        self.expect("{")
        regs = list(self.prog.registers)
        while not self.accept("}"):
            regs.append(self.ident("register name"))
            if not self.at("}"):
                self.expect(",")
        if len(set(regs)) != len(regs):
            self.fail("duplicate register declaration")
        self.prog.registers = tuple(regs)

    def rational(self) -> Fraction:
        neg = self.accept("-")
        if self.tok.kind != "num":
            self.fail("expected a number")
        num = int(self.tok.text)
        self.i += 1
        den = 1
        if self.accept("/"):
            if self.tok.kind != "num":
                self.fail("expected a denominator")
            den = int(self.tok.text)
            self.i += 1
        v = Fraction(num, den)
        return -v if neg else v

    def domains(self):
        self.expect("{")
        while not self.accept("}"):
            name = self.ident("domain name")
            self.expect("=")
            self.expect("{")
            vals = [self.rational()]
            while self.accept(","):
                vals.append(self.rational())
            self.expect("}")
            self.expect(";")
            if len(set(vals)) != len(vals):
                self.fail(f"domain {name} has repeated values")
            self.prog.domains[name] = tuple(vals)

    def channels(self):
        self.expect("{")
        while not self.accept("}"):
            if self.tok.kind == "qident":
                name = self.tok.text
                self.i += 1
                self.prog.channels[name] = None
            else:
                name = self.ident("channel name")
                self.expect(":")
                dom = self.ident("domain name")
                if dom not in self.prog.domains:
                    self.fail(f"unknown domain {dom!r}")
                self.prog.channels[name] = self.prog.domains[dom]
            self.expect(";")

    def ops(self):
        self.expect("{")
        while not self.accept("}"):
            name = self.ident("operator name")
            if name in quantum.GATES:
                self.fail(f"{name} is a builtin gate name")
            self.expect("=")
            kind = self.tok.text
            if kind in ("set", "proj"):
                self.i += 1
                if self.tok.kind != "str":
                    self.fail(f'{kind} needs a quoted state label, e.g. {kind} "0"')
                label = self.tok.text[1:-1]
                self.i += 1
                arity = 2 if label == "bell" else len(label)
                self.prog.ops[name] = OpDecl(name, kind, label, arity)
            elif kind == "measure":
                self.i += 1
                if self.tok.kind != "num":
                    self.fail("measure needs a register count")
                arity = int(self.tok.text)
                self.i += 1
                self.prog.ops[name] = OpDecl(name, "measure", "", arity)
            else:
                self.fail("expected set, proj, or measure")
            self.expect(";")

    def defs(self):
        self.expect("{")
        while not self.accept("}"):
            name = self.ident("process name")
            params: tuple[str, ...] = ()
            qparams: tuple[str, ...] = ()
            if self.accept("("):
                params = self.identlist(stop=";")
                self.expect(";")
                qparams = self.identlist(stop=")")
                self.expect(")")
            self.expect("=")
            body = self.term()
            self.expect(";")
            if name in self.prog.defs:
                self.fail(f"process {name} defined twice")
            for q in qparams:
                if q not in self.prog.registers:
                    self.fail(f"quantum parameter {q} is not a declared register")
            self.prog.defs[name] = ProcDef(name, params, qparams, body)

    def identlist(self, stop: str) -> tuple[str, ...]:
        out: list[str] = []
        while not self.at(stop):
            out.append(self.ident())
            if not self.at(stop):
                self.expect(",")
        return tuple(out)

    def checks(self):
        self.expect("{")
        while not self.accept("}"):
            kind = self.tok.text
            if kind not in ("lts", "bisim", "logic", "oracle"):
                self.fail("expected lts, bisim, logic, or oracle")
            self.i += 1
            operands: list[str] = []
            options: list[tuple[str, str]] = []
            while not self.at(";"):
                if self.tok.kind == "str":
                    operands.append(self.tok.text[1:-1])
                    self.i += 1
                elif self.tok.kind == "ident" and self.toks[self.i + 1].text == "=":
                    key = self.ident()
                    self.expect("=")
                    if self.tok.kind not in ("num", "ident", "str"):
                        self.fail("expected an option value")
                    val = self.tok.text.strip('"')
                    self.i += 1
                    options.append((key, val))
                else:
                    operands.append(self.ident("operand"))
            self.expect(";")
            self.prog.checks.append(
                CheckDirective(kind, tuple(operands), tuple(options))
            )

    # -- expressions -------------------------------------------------------

    def exp(self) -> Exp:
        e = self.exp_term()
        while True:
            if self.accept("+"):
                e = Add(e, self.exp_term())
            elif self.accept("-"):
                e = Sub(e, self.exp_term())
            else:
                return e

    def exp_term(self) -> Exp:
        e = self.exp_primary()
        while self.accept("*"):
            e = Mul(e, self.exp_primary())
        return e

    def exp_primary(self) -> Exp:
        if self.tok.kind == "num" or self.at("-"):
            return Lit(self.rational())
        if self.accept("("):
            e = self.exp()
            self.expect(")")
            return e
        return Var(self.ident("classical variable"))

    def bexp(self) -> BExp:
        b = self.bexp_or()
        if self.accept("->"):
            return Imp(b, self.bexp())
        return b

    def bexp_or(self) -> BExp:
        b = self.bexp_and()
        while self.accept("or"):
            b = bor(b, self.bexp_and())
        return b

    def bexp_and(self) -> BExp:
        b = self.bexp_not()
        while self.accept("and"):
            b = band(b, self.bexp_not())
        return b

    def bexp_not(self) -> BExp:
        if self.accept("not"):
            return bnot(self.bexp_not())
        return self.bexp_atom()

    def bexp_atom(self) -> BExp:
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        mark = self.i
        try:
            l = self.exp()
            for op in ("<=", ">=", "<", ">", "="):
                if self.accept(op):
                    return Cmp(op, l, self.exp())
            self.fail("expected a comparison operator")
        except ParseError:
            self.i = mark
        self.expect("(")
        b = self.bexp()
        self.expect(")")
        return b

    # -- terms -------------------------------------------------------------

    def term(self) -> Term:
        t = self.term_sum()
        while self.accept("||"):
            t = Par(t, self.term_sum())
        return t

    def term_sum(self) -> Term:
        t = self.term_factor()
        while self.at("+"):
            # only a sum if a term follows, never inside an expression
            self.i += 1
            t = Sum(t, self.term_factor())
        return t

    def term_factor(self) -> Term:
        t = self.term_basic()
        while True:
            if self.accept("\\"):
                self.expect("{")
                chans: list[str] = []
                while not self.accept("}"):
                    if self.tok.kind in ("ident", "qident"):
                        chans.append(self.tok.text)
                        self.i += 1
                    else:
                        self.fail("expected a channel name")
                    if not self.at("}"):
                        self.expect(",")
                t = Restrict(t, frozenset(chans))
            elif self.at("[") and self._relabel_ahead():
                self.i += 1
                pairs: list[tuple[str, str]] = []
                while True:
                    new = self._chan_name()
                    self.expect("/")
                    old = self._chan_name()
                    if new.startswith("@") != old.startswith("@"):
                        self.fail("relabelling must preserve channel kind")
                    pairs.append((new, old))
                    if not self.accept(","):
                        break
                self.expect("]")
                t = Relabel(t, tuple(pairs))
            else:
                return t

    def _chan_name(self) -> str:
        if self.tok.kind == "qident":
            name = self.tok.text
            self.i += 1
            return name
        return self.ident("channel name")

    def _relabel_ahead(self) -> bool:
        # distinguish t[new/old] from an operator application start
        j = self.i + 1
        return (
            self.toks[j].kind in ("ident", "qident")
            and self.toks[j + 1].text == "/"
        )

    def term_basic(self) -> Term:
        pos = (self.tok.line, self.tok.col)
        if self.accept("nil"):
            return Nil(pos=pos)
        if self.accept("("):
            t = self.term()
            self.expect(")")
            return t
        if self.accept("if"):
            cond = self.bexp()
            self.expect("then")
            return If(cond, self.term_factor(), pos=pos)
        if self.accept("tau"):
            self.expect(".")
            return Prefix(Tau(), self.term_factor(), pos=pos)
        if self.tok.kind == "qident":
            chan = self.tok.text
            self.i += 1
            self._known_channel(chan)
            if self.accept("?"):
                reg = self._register()
                self.expect(".")
                return Prefix(QIn(chan, reg), self.term_factor(), pos=pos)
            self.expect("!")
            reg = self._register()
            self.expect(".")
            return Prefix(QOut(chan, reg), self.term_factor(), pos=pos)
        name = self.ident("process, channel, or operator name")
        if self.at("["):
            return self._op_prefix(name, pos)
        if self.at("?") or self.at("!"):
            return self._classical_action(name, pos)
        if self.accept("("):
            exps: list[Exp] = []
            while not self.at(";"):
                exps.append(self.exp())
                if not self.at(";"):
                    self.expect(",")
            self.expect(";")
            regs = []
            while not self.at(")"):
                regs.append(self._register())
                if not self.at(")"):
                    self.expect(",")
            self.expect(")")
            return ConstCall(name, tuple(exps), tuple(regs), pos=pos)
        return ConstCall(name, pos=pos)

    def _register(self) -> str:
        r = self.ident("register")
        if r not in self.prog.registers:
            self.fail(f"{r} is not a declared register")
        return r

    def _known_channel(self, chan: str):
        if chan not in self.prog.channels:
            self.fail(f"channel {chan} not declared")

    def _classical_action(self, chan: str, pos) -> Term:
        self._known_channel(chan)
        dom = self.prog.channels[chan]
        if self.accept("?"):
            var = self.ident("input variable")
            self.expect(".")
            return Prefix(CIn(chan, var, dom), self.term_factor(), pos=pos)
        self.expect("!")
        e = self.exp()
        self.expect(".")
        return Prefix(COut(chan, e), self.term_factor(), pos=pos)

    def _op_prefix(self, name: str, pos) -> Term:
        self.expect("[")
        regs = [self._register()]
        while self.accept(","):
            regs.append(self._register())
        var = None
        if self.accept(";"):
            var = self.ident("outcome variable")
        self.expect("]")
        self.expect(".")
        regs = tuple(regs)
        decl = self.prog.ops.get(name)
        if decl is None:
            if name not in quantum.GATES:
                self.fail(f"unknown operator {name}")
            if var is not None:
                self.fail(f"{name} is a unitary gate, not a measurement")
            op = self._instantiate(lambda: quantum.builtin(name, regs))
            return Prefix(SuperOpApp(name, regs, op), self.term_factor(), pos=pos)
        if decl.kind == "measure":
            if var is None:
                self.fail(f"measurement {name} needs an outcome variable: "
                          f"{name}[...;x]")
            m = self._instantiate(lambda: decl.instantiate(regs))
            return Prefix(Meas(name, regs, var, m), self.term_factor(), pos=pos)
        if var is not None:
            self.fail(f"{name} is not a measurement")
        op = self._instantiate(lambda: decl.instantiate(regs))
        return Prefix(SuperOpApp(name, regs, op), self.term_factor(), pos=pos)

    def _instantiate(self, build):
        try:
            return build()
        except ValueError as e:
            self.fail(str(e))


def parse(src: str) -> Program:
    """Parse a full .qccs file; raises ParseError with line:column."""
    prog = _Parser(src).program()
    problems = prog.validate()
    if problems:
        raise ParseError("; ".join(problems), 0, 0)
    return prog


def parse_term(src: str, prog: Program) -> Term:
    """Parse a single term against an existing program's declarations."""
    p = _Parser("")
    p.prog = prog
    p.toks = tokenize(src)
    p.i = 0
    t = p.term()
    if p.tok.kind != "eof":
        p.fail(f"unexpected trailing input {p.tok.text!r}")
    return t
