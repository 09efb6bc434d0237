"""Instructions, system configurations and their compiled (index-based) form.

A configuration fixes a finite universe of masters, programs, addresses,
registers and values.  All transition semantics live in ``kernel``; this
module only validates and indexes the static data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache


class InvalidConfig(Exception):
    """Raised when a SystemConfig violates its structural invariants."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class InstrKind(enum.Enum):
    STORE = "ST"
    LOAD = "LD"
    SC_REL_STORE = "SCST.REL"
    SC_ACQ_LOAD = "SCLD.ACQ"
    FENCE = "FENCE"


MEMACCESS_KINDS = frozenset(
    {InstrKind.STORE, InstrKind.LOAD, InstrKind.SC_REL_STORE, InstrKind.SC_ACQ_LOAD}
)
STORE_KINDS = frozenset({InstrKind.STORE, InstrKind.SC_REL_STORE})
LOAD_KINDS = frozenset({InstrKind.LOAD, InstrKind.SC_ACQ_LOAD})
ATOMIC_KINDS = frozenset({InstrKind.SC_REL_STORE, InstrKind.SC_ACQ_LOAD})


@dataclass(frozen=True)
class Instruction:
    """One transaction: a store, load, atomic access or fence.

    ``index`` is the 1-based position in the issuer's program.  Exactly the
    fields appropriate to the kind are set: stores carry address+value,
    loads carry address+register, fences carry neither.
    """

    id: str
    kind: InstrKind
    issuer: str
    index: int
    address: str | None = None
    value: int | None = None
    register: str | None = None

    def is_memaccess(self) -> bool:
        return self.kind in MEMACCESS_KINDS

    def is_store(self) -> bool:
        return self.kind in STORE_KINDS

    def is_load(self) -> bool:
        return self.kind in LOAD_KINDS

    def field_problems(self) -> list[str]:
        """Kind/field consistency problems, empty if well-formed."""
        p = []
        k = self.kind
        if k in STORE_KINDS:
            if self.address is None or self.value is None:
                p.append(f"{self.id}: store needs address and value")
            if self.register is not None:
                p.append(f"{self.id}: store must not name a register")
        elif k in LOAD_KINDS:
            if self.address is None or self.register is None:
                p.append(f"{self.id}: load needs address and register")
            if self.value is not None:
                p.append(f"{self.id}: load must not carry a value")
        else:  # fence
            if self.address is not None or self.value is not None or self.register is not None:
                p.append(f"{self.id}: fence carries no operands")
        if self.value is not None and self.value < 0:
            p.append(f"{self.id}: values are nonnegative")
        if self.index < 1:
            p.append(f"{self.id}: program positions are 1-based")
        return p


@dataclass(frozen=True)
class SystemConfig:
    """Masters, their programs, initial memory and the finite domains.

    ``programs`` is aligned with ``masters``.  Domains must cover every
    address/register/value any instruction mentions; ``values`` always
    contains 0 (the register initialisation value).
    """

    masters: tuple[str, ...]
    programs: tuple[tuple[Instruction, ...], ...]
    initial_memory: tuple[tuple[str, int], ...]
    addresses: frozenset[str]
    values: frozenset[int]
    registers: frozenset[str]

    @staticmethod
    def build(
        masters: list[str] | tuple[str, ...],
        programs: dict[str, list[Instruction]],
        initial_memory: dict[str, int] | None = None,
        extra_values: set[int] | None = None,
    ) -> "SystemConfig":
        """Assemble a config, inferring domains from the instructions.

        Addresses not present in ``initial_memory`` default to 0.
        """
        init = dict(initial_memory or {})
        addrs: set[str] = set(init)
        vals: set[int] = {0} | set(init.values()) | set(extra_values or ())
        regs: set[str] = set()
        progs = []
        for m in masters:
            prog = tuple(programs.get(m, ()))
            progs.append(prog)
            for ins in prog:
                if ins.address is not None:
                    addrs.add(ins.address)
                if ins.value is not None:
                    vals.add(ins.value)
                if ins.register is not None:
                    regs.add(ins.register)
        for a in addrs:
            init.setdefault(a, 0)
        cfg = SystemConfig(
            masters=tuple(masters),
            programs=tuple(progs),
            initial_memory=tuple(sorted(init.items())),
            addresses=frozenset(addrs),
            values=frozenset(vals),
            registers=frozenset(regs),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Raise InvalidConfig if any structural invariant fails."""
        problems = []
        if len(self.masters) != len(set(self.masters)):
            problems.append("duplicate master ids")
        if len(self.programs) != len(self.masters):
            problems.append("programs not aligned with masters")
        init = dict(self.initial_memory)
        seen_ids: set[str] = set()
        for m, prog in zip(self.masters, self.programs):
            for pos, ins in enumerate(prog, start=1):
                problems.extend(ins.field_problems())
                if ins.id in seen_ids:
                    problems.append(f"duplicate instruction id {ins.id}")
                seen_ids.add(ins.id)
                if ins.issuer != m:
                    problems.append(f"{ins.id}: issuer {ins.issuer} does not own the program of {m}")
                if ins.index != pos:
                    problems.append(f"{ins.id}: index {ins.index} != program position {pos}")
                if ins.address is not None:
                    if ins.address not in self.addresses:
                        problems.append(f"{ins.id}: address {ins.address} outside domain")
                    elif ins.address not in init:
                        problems.append(f"{ins.id}: no initial value for {ins.address}")
                if ins.value is not None and ins.value not in self.values:
                    problems.append(f"{ins.id}: value {ins.value} outside domain")
                if ins.register is not None and ins.register not in self.registers:
                    problems.append(f"{ins.id}: register {ins.register} outside domain")
        if 0 not in self.values:
            problems.append("value domain must contain 0")
        for a, v in self.initial_memory:
            if a not in self.addresses:
                problems.append(f"initial memory names unknown address {a}")
            if v not in self.values:
                problems.append(f"initial value {v} of {a} outside domain")
        if problems:
            raise InvalidConfig(problems)

    def program_of(self, master: str) -> tuple[Instruction, ...]:
        return self.programs[self.masters.index(master)]

    def instructions(self) -> tuple[Instruction, ...]:
        return tuple(ins for prog in self.programs for ins in prog)

    def instruction(self, instr_id: str) -> Instruction:
        for ins in self.instructions():
            if ins.id == instr_id:
                return ins
        raise KeyError(instr_id)

    def initial_value(self, address: str) -> int:
        return dict(self.initial_memory)[address]


class CompiledConfig:
    """Index-based tables for one SystemConfig.

    Instructions get dense slots (program order, master by master), masters,
    addresses and registers get dense indices; the kernel operates on these
    exclusively.  Bit positions in instruction masks are slots, in master
    masks master indices.
    """

    def __init__(self, config: SystemConfig):
        config.validate()
        self.config = config
        self.masters = config.masters
        self.n_masters = len(config.masters)
        self.addr_names = tuple(sorted(config.addresses))
        self.reg_names = tuple(sorted(config.registers))
        self.addr_index = {a: i for i, a in enumerate(self.addr_names)}
        self.reg_index = {r: i for i, r in enumerate(self.reg_names)}
        self.master_index = {m: i for i, m in enumerate(config.masters)}

        instrs: list[Instruction] = []
        program_slots: list[tuple[int, ...]] = []
        for prog in config.programs:
            start = len(instrs)
            instrs.extend(prog)
            program_slots.append(tuple(range(start, len(instrs))))
        self.program_slots = tuple(program_slots)
        self.instrs = tuple(instrs)
        self.n_instr = len(instrs)
        self.slot_of = {ins.id: i for i, ins in enumerate(instrs)}

        self.kind = tuple(ins.kind for ins in instrs)
        self.issuer_ix = tuple(self.master_index[ins.issuer] for ins in instrs)
        self.index_of = tuple(ins.index for ins in instrs)
        self.addr_ix = tuple(
            self.addr_index[ins.address] if ins.address is not None else -1 for ins in instrs
        )
        self.value_of = tuple(ins.value if ins.value is not None else -1 for ins in instrs)
        self.reg_ix = tuple(
            self.reg_index[ins.register] if ins.register is not None else -1 for ins in instrs
        )

        self.access_mask = 0
        self.plain_store_slots: list[int] = []
        self.plain_load_slots: list[int] = []
        self.rel_store_slots: list[int] = []
        self.acq_load_slots: list[int] = []
        self.fence_slots: list[int] = []
        for i, ins in enumerate(instrs):
            if ins.is_memaccess():
                self.access_mask |= 1 << i
            if ins.kind is InstrKind.STORE:
                self.plain_store_slots.append(i)
            elif ins.kind is InstrKind.LOAD:
                self.plain_load_slots.append(i)
            elif ins.kind is InstrKind.SC_REL_STORE:
                self.rel_store_slots.append(i)
            elif ins.kind is InstrKind.SC_ACQ_LOAD:
                self.acq_load_slots.append(i)
            else:
                self.fence_slots.append(i)
        self.fence_mask = sum(1 << i for i in self.fence_slots)
        self.all_masters_mask = (1 << self.n_masters) - 1

        # Stores (either kind) per address: witness candidates for loads.
        self.stores_to_addr: tuple[tuple[int, ...], ...] = tuple(
            tuple(
                i
                for i in sorted((*self.plain_store_slots, *self.rel_store_slots))
                if self.addr_ix[i] == a
            )
            for a in range(len(self.addr_names))
        )

        # Per master: fence slots, and a flag mask of that master's fences.
        self.fences_of_master = tuple(
            tuple(i for i in self.fence_slots if self.issuer_ix[i] == m)
            for m in range(self.n_masters)
        )
        self.fence_mask_of_master = tuple(
            sum(1 << i for i in slots) for slots in self.fences_of_master
        )

        # ahead(f): memory accesses of the fence's issuer earlier in program
        # order.  Static: masters issue in program order, positions never move.
        self.ahead_mask = tuple(
            (
                sum(
                    1 << j
                    for j in self.program_slots[self.issuer_ix[i]]
                    if self.index_of[j] < self.index_of[i] and (self.access_mask >> j) & 1
                )
                if ins.kind is InstrKind.FENCE
                else 0
            )
            for i, ins in enumerate(instrs)
        )

        # Program-order memory-access predecessors (release-store guard).
        self.pred_access_slots = tuple(
            tuple(
                j
                for j in self.program_slots[self.issuer_ix[i]]
                if self.index_of[j] < self.index_of[i] and (self.access_mask >> j) & 1
            )
            for i in range(self.n_instr)
        )
        # Acquire loads earlier in the same program (acquire blocks later
        # accesses until it is observed by its issuer).
        self.acq_pred_slots = tuple(
            tuple(
                j
                for j in self.program_slots[self.issuer_ix[i]]
                if self.index_of[j] < self.index_of[i] and self.kind[j] is InstrKind.SC_ACQ_LOAD
            )
            for i in range(self.n_instr)
        )

        self.initial_lov = tuple(
            tuple(config.initial_value(a) for a in self.addr_names)
            for _ in range(self.n_masters)
        )
        self.initial_rf = tuple(
            tuple(0 for _ in self.reg_names) for _ in range(self.n_masters)
        )

    def slot(self, instr_id: str) -> int:
        try:
            return self.slot_of[instr_id]
        except KeyError:
            raise KeyError(f"unknown instruction id {instr_id!r}") from None

    def mask_to_masters(self, mask: int) -> frozenset[str]:
        return frozenset(m for i, m in enumerate(self.masters) if (mask >> i) & 1)

    def mask_to_instr_ids(self, mask: int) -> frozenset[str]:
        return frozenset(
            ins.id for i, ins in enumerate(self.instrs) if (mask >> i) & 1
        )


@lru_cache(maxsize=128)
def compile_config(config: SystemConfig) -> CompiledConfig:
    return CompiledConfig(config)
