"""Gate-level netlist IR: parsing, writing, validation, anonymization.

The netlist is a flat, single-module, bit-level structural description with a
closed 12-kind cell vocabulary. It is the one representation every analysis
and transformation in this package consumes and produces.

Text format (line oriented, ``#`` starts a comment)::

    module NAME
    input  N           # primary input, also declares net N
    output N           # primary output, also declares net N
    net    N           # internal net
    attr   KEY VALUE   # optional module attribute
    cell   KIND ID PORT=NET ... [tag=analog_island]
    endmodule

Identifiers match ``[A-Za-z0-9_\\[\\]]+``. All nets are one bit wide; a
multi-bit port is expanded as ``name[i]``. Every net must be driven exactly
once, either by an input port or by one cell output pin.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace

ID_RE = re.compile(r"^[A-Za-z0-9_\[\]]+$")

ANALOG_ISLAND_TAG = "analog_island"

# kind -> (input pins, output pins). DFF is the only sequential kind; its
# rst pin is optional and sampled synchronously (active high, clears to 0).
CELL_PORTS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "INV": (("a",), ("y",)),
    "BUF": (("a",), ("y",)),
    "AND2": (("a", "b"), ("y",)),
    "OR2": (("a", "b"), ("y",)),
    "XOR2": (("a", "b"), ("y",)),
    "XNOR2": (("a", "b"), ("y",)),
    "NAND2": (("a", "b"), ("y",)),
    "NOR2": (("a", "b"), ("y",)),
    "MUX2": (("a", "b", "s"), ("y",)),          # y = s ? b : a
    "MUX4": (("a", "b", "c", "d", "s0", "s1"), ("y",)),  # sel = s1s0
    "DFF": (("d", "clk"), ("q",)),              # rst optional
    "TIE0": ((), ("y",)),
    "TIE1": ((), ("y",)),
}

SEQUENTIAL_KINDS = frozenset({"DFF"})
DFF_OPTIONAL_PINS = frozenset({"rst"})


class NetlistError(Exception):
    """Base class for all netlist format and structure errors."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class UnknownCellKindError(NetlistError):
    pass


class ArityMismatchError(NetlistError):
    pass


class UndrivenNetError(NetlistError):
    pass


class MultiplyDrivenNetError(NetlistError):
    pass


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "in" | "out"


@dataclass
class Cell:
    kind: str
    name: str
    pins: dict[str, str]            # pin -> net
    tags: frozenset[str] = frozenset()

    def is_seq(self):
        return self.kind in SEQUENTIAL_KINDS

    def output_nets(self):
        return [self.pins[p] for p in CELL_PORTS[self.kind][1]]

    def input_pins(self):
        """(pin, net) pairs for every bound input pin, optional ones included."""
        ins, outs = CELL_PORTS[self.kind]
        return [(p, n) for p, n in self.pins.items() if p not in outs]


@dataclass
class Netlist:
    name: str
    ports: list[Port] = field(default_factory=list)
    nets: list[str] = field(default_factory=list)   # internal nets only
    cells: list[Cell] = field(default_factory=list)
    attributes: dict[str, str] = field(default_factory=dict)

    def input_ports(self):
        return [p.name for p in self.ports if p.direction == "in"]

    def output_ports(self):
        return [p.name for p in self.ports if p.direction == "out"]

    def all_nets(self):
        """All net ids: port nets first (declaration order), then internal."""
        return [p.name for p in self.ports] + list(self.nets)

    def cells_by_name(self):
        return {c.name: c for c in self.cells}

    def flip_flops(self):
        return [c for c in self.cells if c.is_seq()]

    def cell_count(self):
        return len(self.cells)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def _check_cell(kind, name, pins, line=None):
    if kind not in CELL_PORTS:
        raise UnknownCellKindError(f"unknown cell kind {kind!r} for cell {name!r}")
    ins, outs = CELL_PORTS[kind]
    required = set(ins) | set(outs)
    optional = DFF_OPTIONAL_PINS if kind == "DFF" else frozenset()
    bound = set(pins)
    missing = required - bound
    extra = bound - required - optional
    if missing or extra:
        raise ArityMismatchError(
            f"cell {name!r} ({kind}): "
            + (f"missing pins {sorted(missing)} " if missing else "")
            + (f"unexpected pins {sorted(extra)}" if extra else "")
        )


def _check_drivers(netlist):
    drivers: dict[str, list[str]] = {}
    for p in netlist.ports:
        if p.direction == "in":
            drivers.setdefault(p.name, []).append(f"input port {p.name}")
    for c in netlist.cells:
        for net in c.output_nets():
            drivers.setdefault(net, []).append(f"cell {c.name}")
    read = {net for c in netlist.cells for _, net in c.input_pins()}
    for net in netlist.all_nets():
        got = drivers.get(net, [])
        # a dangling never-read net parses; validate() still reports it
        if not got and net in read:
            raise UndrivenNetError(f"net {net!r} has no driver")
        if len(got) > 1:
            raise MultiplyDrivenNetError(f"net {net!r} driven by {', '.join(got)}")


def parse_netlist(text: str) -> Netlist:
    """Parse netlist source text into the IR.

    Raises a distinct error for each failure class: syntax, unknown cell
    kind, arity mismatch, undriven net, multiply-driven net.
    """
    netlist = None
    closed = False
    declared: set[str] = set()
    names: set[str] = set()

    def declare(net, lineno):
        if not ID_RE.match(net):
            raise NetlistSyntaxError(f"bad identifier {net!r}", lineno)
        if net in declared:
            raise NetlistSyntaxError(f"net {net!r} declared twice", lineno)
        declared.add(net)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if kw == "module":
            if netlist is not None:
                raise NetlistSyntaxError("duplicate module line", lineno)
            if len(tok) != 2 or not ID_RE.match(tok[1]):
                raise NetlistSyntaxError("expected: module NAME", lineno)
            netlist = Netlist(name=tok[1])
            continue
        if netlist is None:
            raise NetlistSyntaxError("statement before module line", lineno)
        if closed:
            raise NetlistSyntaxError("statement after endmodule", lineno)
        if kw in ("input", "output"):
            if len(tok) != 2:
                raise NetlistSyntaxError(f"expected: {kw} NET", lineno)
            declare(tok[1], lineno)
            netlist.ports.append(Port(tok[1], "in" if kw == "input" else "out"))
        elif kw == "net":
            if len(tok) != 2:
                raise NetlistSyntaxError("expected: net NET", lineno)
            declare(tok[1], lineno)
            netlist.nets.append(tok[1])
        elif kw == "attr":
            if len(tok) != 3:
                raise NetlistSyntaxError("expected: attr KEY VALUE", lineno)
            netlist.attributes[tok[1]] = tok[2]
        elif kw == "cell":
            if len(tok) < 3:
                raise NetlistSyntaxError("expected: cell KIND ID PIN=NET ...", lineno)
            kind, name = tok[1], tok[2]
            if not ID_RE.match(name):
                raise NetlistSyntaxError(f"bad identifier {name!r}", lineno)
            if name in names:
                raise NetlistSyntaxError(f"cell {name!r} declared twice", lineno)
            names.add(name)
            pins: dict[str, str] = {}
            tags = set()
            for item in tok[3:]:
                if "=" not in item:
                    raise NetlistSyntaxError(f"expected PIN=NET, got {item!r}", lineno)
                pin, net = item.split("=", 1)
                if pin == "tag":
                    tags.add(net)
                    continue
                if not ID_RE.match(net):
                    raise NetlistSyntaxError(f"bad identifier {net!r}", lineno)
                if pin in pins:
                    raise NetlistSyntaxError(f"pin {pin!r} bound twice", lineno)
                if net not in declared:
                    raise NetlistSyntaxError(f"net {net!r} not declared", lineno)
                pins[pin] = net
            _check_cell(kind, name, pins, lineno)
            netlist.cells.append(Cell(kind, name, pins, frozenset(tags)))
        elif kw == "endmodule":
            closed = True
        else:
            raise NetlistSyntaxError(f"unknown keyword {kw!r}", lineno)

    if netlist is None:
        raise NetlistSyntaxError("no module found")
    if not closed:
        raise NetlistSyntaxError("missing endmodule")
    _check_drivers(netlist)
    return netlist


def write_netlist(netlist: Netlist) -> str:
    """Serialize to text. ``parse_netlist(write_netlist(n)) == n`` exactly."""
    out = [f"module {netlist.name}"]
    for p in netlist.ports:
        out.append(f"{'input' if p.direction == 'in' else 'output'} {p.name}")
    for net in netlist.nets:
        out.append(f"net {net}")
    for k in sorted(netlist.attributes):
        out.append(f"attr {k} {netlist.attributes[k]}")
    for c in netlist.cells:
        ins, outs = CELL_PORTS[c.kind]
        order = list(ins) + (["rst"] if "rst" in c.pins else []) + list(outs)
        pins = " ".join(f"{p}={c.pins[p]}" for p in order)
        tags = "".join(f" tag={t}" for t in sorted(c.tags))
        out.append(f"cell {c.kind} {c.name}{' ' + pins if pins else ''}{tags}")
    out.append("endmodule")
    return "\n".join(out) + "\n"


def validate(netlist: Netlist) -> list[Violation]:
    """Structural check; returns violations as data (empty list = valid).

    Combinational cycles are located by SCC-style elimination over non-DFF
    cells; a cycle is only a violation if some cell on it lacks the
    ``analog_island`` tag.
    """
    violations = []
    seen_cells: set[str] = set()
    declared = set(netlist.all_nets())
    drivers: dict[str, list[str]] = {}
    for p in netlist.ports:
        if p.direction == "in":
            drivers.setdefault(p.name, []).append(f"port {p.name}")
    for c in netlist.cells:
        if c.name in seen_cells:
            violations.append(Violation("duplicate-cell", c.name))
        seen_cells.add(c.name)
        if c.kind not in CELL_PORTS:
            violations.append(Violation("unknown-kind", f"{c.name}: {c.kind}"))
            continue
        try:
            _check_cell(c.kind, c.name, c.pins)
        except ArityMismatchError as e:
            violations.append(Violation("arity", str(e)))
            continue
        for _, net in c.pins.items():
            if net not in declared:
                violations.append(Violation("undeclared-net", f"{c.name}: {net}"))
        for net in c.output_nets():
            drivers.setdefault(net, []).append(f"cell {c.name}")
    for net in netlist.all_nets():
        got = drivers.get(net, [])
        if not got:
            violations.append(Violation("undriven-net", net))
        elif len(got) > 1:
            violations.append(Violation("multi-driven-net", f"{net}: {got}"))

    violations.extend(_find_comb_cycles(netlist))
    return violations


def _find_comb_cycles(netlist):
    """Kahn elimination over combinational cells; leftovers lie on cycles."""
    net_driver = {}
    for c in netlist.cells:
        if c.kind in CELL_PORTS:
            for net in c.output_nets():
                net_driver[net] = c
    comb = [c for c in netlist.cells if c.kind in CELL_PORTS and not c.is_seq()]
    indeg = {}
    fanout: dict[str, list[Cell]] = {}
    for c in comb:
        n = 0
        for _, net in c.input_pins():
            d = net_driver.get(net)
            if d is not None and not d.is_seq():
                n += 1
                fanout.setdefault(d.name, []).append(c)
        indeg[c.name] = n
    queue = [c for c in comb if indeg[c.name] == 0]
    done = 0
    while queue:
        c = queue.pop()
        done += 1
        for s in fanout.get(c.name, []):
            indeg[s.name] -= 1
            if indeg[s.name] == 0:
                queue.append(s)
    if done == len(comb):
        return []
    cyclic = [c for c in comb if indeg[c.name] > 0]
    bad = [c.name for c in cyclic if ANALOG_ISLAND_TAG not in c.tags]
    if not bad:
        return []
    return [Violation("combinational-cycle", ",".join(sorted(bad)))]


def anonymize(netlist: Netlist, seed: int) -> tuple[Netlist, dict[str, str]]:
    """Strip design meaning: rename every port/net/cell to an opaque id and
    permute declaration order, all deterministically from ``seed``.

    Returns the blind netlist and the old-id -> new-id rename map covering
    ports, nets and cells. The result is graph-isomorphic to the input.
    """
    rng = random.Random(seed)

    def fresh_ids(prefix, count):
        ids = [f"{prefix}{i:06d}" for i in range(count)]
        rng.shuffle(ids)
        return ids

    net_names = [p.name for p in netlist.ports] + list(netlist.nets)
    net_map = dict(zip(net_names, fresh_ids("n", len(net_names))))
    cell_map = dict(zip((c.name for c in netlist.cells),
                        fresh_ids("u", len(netlist.cells))))

    ports = [Port(net_map[p.name], p.direction) for p in netlist.ports]
    rng.shuffle(ports)
    nets = [net_map[n] for n in netlist.nets]
    rng.shuffle(nets)
    cells = [
        Cell(c.kind, cell_map[c.name],
             {pin: net_map[net] for pin, net in c.pins.items()}, c.tags)
        for c in netlist.cells
    ]
    rng.shuffle(cells)
    blind = Netlist(name="anon", ports=ports, nets=nets, cells=cells,
                    attributes=dict(netlist.attributes))
    rename = dict(net_map)
    rename.update(cell_map)
    return blind, rename


def copy_netlist(netlist: Netlist) -> Netlist:
    return Netlist(
        name=netlist.name,
        ports=list(netlist.ports),
        nets=list(netlist.nets),
        cells=[replace(c, pins=dict(c.pins)) for c in netlist.cells],
        attributes=dict(netlist.attributes),
    )
