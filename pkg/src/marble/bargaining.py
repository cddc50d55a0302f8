"""Multi-party price negotiation: six actions, persona-driven parties, pairwise sessions.

Each `negotiates` relation spawns an independent pairwise session over the
product. A session stays open until someone accepts a standing offer, someone
walks away, or the run's iteration cap expires (then it closes as no-deal).
Terminal sessions absorb: nothing changes them afterwards.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .environment import ActionOutcome, Environment, ToolParam, ToolSchema
from .errors import NegotiationError
from .graph import RelationKind
from .records import EventRecorder


class Side(str, Enum):
    BUYER = "buyer"
    SELLER = "seller"


class Style(str, Enum):
    AGGRESSIVE = "aggressive"
    COOPERATIVE = "cooperative"
    NEUTRAL = "neutral"


TRAIT_LEVELS = [
    "very_negative",
    "moderately_negative",
    "slightly_negative",
    "slightly_positive",
    "moderately_positive",
    "very_positive",
]
TRAITS = ["OPE", "CON", "EXT", "AGR", "NEU"]

BUYER_PRIORITIES = ["price negotiation", "delivery time", "product quality", "service flexibility"]
SELLER_PRIORITIES = ["inventory clearance", "brand reputation", "repeat business", "bulk discounts"]

# tool names exposed to agents, bit-exact
ACTIONS = (
    "offer_price",
    "reject_and_counter",
    "accept_offer",
    "provide_information",
    "inquire_intentions",
    "end_negotiation",
)


@dataclass
class Product:
    name: str
    listed_price: float
    rating: float = 0.0
    category: str = ""

    def __post_init__(self):
        if self.listed_price <= 0:
            raise NegotiationError(f"listed_price must be positive, got {self.listed_price}")
        if not 0 <= self.rating <= 5:
            raise NegotiationError(f"rating must be in [0, 5], got {self.rating}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "listed_price": self.listed_price,
            "rating": self.rating,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Product":
        return cls(
            name=data["name"],
            listed_price=float(data["listed_price"]),
            rating=float(data.get("rating", 0.0)),
            category=data.get("category", ""),
        )


@dataclass
class NegotiatorProfile:
    side: Side
    style: Style = Style.NEUTRAL
    big_five: dict[str, str] = field(default_factory=dict)
    priorities: list[str] = field(default_factory=list)
    budget_or_floor: Optional[float] = None

    def __post_init__(self):
        for trait, level in self.big_five.items():
            if trait not in TRAITS:
                raise NegotiationError(f"unknown personality trait {trait!r}")
            if level not in TRAIT_LEVELS:
                raise NegotiationError(f"unknown trait level {level!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "side": self.side.value,
            "style": self.style.value,
            "big_five": dict(self.big_five),
            "priorities": list(self.priorities),
            "budget_or_floor": self.budget_or_floor,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NegotiatorProfile":
        return cls(
            side=Side(data["side"]),
            style=Style(data.get("style", "neutral")),
            big_five=dict(data.get("big_five", {})),
            priorities=list(data.get("priorities", [])),
            budget_or_floor=data.get("budget_or_floor"),
        )


def random_profile(side: Side, rng: random.Random) -> NegotiatorProfile:
    return NegotiatorProfile(
        side=side,
        style=rng.choice(list(Style)),
        big_five={trait: rng.choice(TRAIT_LEVELS) for trait in TRAITS},
        priorities=list(BUYER_PRIORITIES if side is Side.BUYER else SELLER_PRIORITIES),
    )


@dataclass
class NegotiationAction:
    agent: str
    action: str
    price: Optional[float] = None
    text: str = ""

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"agent": self.agent, "action": self.action}
        if self.price is not None:
            out["price"] = self.price
        if self.text:
            out["text"] = self.text
        return out


@dataclass
class Offer:
    by: str
    price: float
    justification: str = ""


@dataclass
class NegotiationState:
    product: Product
    participants: dict[str, NegotiatorProfile]
    transcript: list[NegotiationAction] = field(default_factory=list)
    current_offer: Optional[Offer] = None
    status: str = "open"  # open | deal | no_deal
    deal_price: Optional[float] = None
    deal_buyer: Optional[str] = None
    deal_seller: Optional[str] = None

    def profile(self, agent: str) -> NegotiatorProfile:
        try:
            return self.participants[agent]
        except KeyError:
            raise NegotiationError(f"{agent!r} is not a participant") from None


def apply_action(
    state: NegotiationState,
    agent: str,
    action: str,
    payload: Optional[dict[str, Any]] = None,
) -> NegotiationState:
    """Apply one negotiation action; raises NegotiationError without mutating
    state when the action is invalid."""
    payload = payload or {}
    if state.status != "open":
        raise NegotiationError(f"negotiation already closed ({state.status})")
    profile = state.profile(agent)
    if action not in ACTIONS:
        raise NegotiationError(f"unknown action {action!r}")

    if action in ("offer_price", "reject_and_counter"):
        try:
            price = float(payload.get("price"))
        except (TypeError, ValueError):
            raise NegotiationError("offer requires a numeric price") from None
        if price <= 0:
            raise NegotiationError(f"price must be positive, got {price}")
        if action == "reject_and_counter":
            if state.current_offer is None:
                raise NegotiationError("no standing offer to counter")
            if state.current_offer.by == agent:
                raise NegotiationError("cannot counter your own offer")
        justification = str(payload.get("justification", ""))
        state.current_offer = Offer(by=agent, price=price, justification=justification)
        state.transcript.append(NegotiationAction(agent, action, price=price, text=justification))
        return state

    if action == "accept_offer":
        offer = state.current_offer
        if offer is None:
            raise NegotiationError("no standing offer to accept")
        if offer.by == agent:
            raise NegotiationError("cannot accept your own offer")
        other = state.profile(offer.by)
        state.status = "deal"
        state.deal_price = offer.price
        if profile.side is Side.BUYER:
            state.deal_buyer, state.deal_seller = agent, offer.by
        else:
            state.deal_buyer, state.deal_seller = offer.by, agent
        del other  # counterparty validated as a participant
        state.transcript.append(NegotiationAction(agent, action, price=offer.price))
        return state

    if action == "end_negotiation":
        state.status = "no_deal"
        state.transcript.append(NegotiationAction(agent, action))
        return state

    # provide_information / inquire_intentions: transcript only
    state.transcript.append(NegotiationAction(agent, action, text=str(payload.get("text", ""))))
    return state


@dataclass
class NegotiationSummary:
    status: str
    deal_price: Optional[float]
    actions_by_agent: dict[str, list[str]]
    offers: list[dict[str, Any]]
    standing_offer: Optional[dict[str, Any]]


def summarize(state: NegotiationState) -> NegotiationSummary:
    """Structured digest of a session for evaluation inputs."""
    actions: dict[str, list[str]] = {agent: [] for agent in sorted(state.participants)}
    offers = []
    for entry in state.transcript:
        actions[entry.agent].append(entry.action)
        if entry.action in ("offer_price", "reject_and_counter"):
            offers.append({"by": entry.agent, "price": entry.price})
    standing = None
    if state.current_offer is not None:
        standing = {"by": state.current_offer.by, "price": state.current_offer.price}
    return NegotiationSummary(
        status=state.status,
        deal_price=state.deal_price,
        actions_by_agent=actions,
        offers=offers,
        standing_offer=standing,
    )


# --------------------------------------------------------------------------
# catalog handling


def load_catalog(text: str) -> list[Product]:
    """One JSON object per line: {name, listed_price, rating, category}."""
    import json

    products = []
    for line in text.splitlines():
        if line.strip():
            products.append(Product.from_dict(json.loads(line)))
    return products


_CATEGORIES = [
    "Women's Handbags", "Women's Shoes", "Girls' Clothing", "Baby Gifts",
    "Industrial Power & Hand Tools", "Industrial Hardware", "Filtration",
    "Beauty Tools & Accessories", "Nintendo Switch Consoles, Games & Accessories",
    "Baby Boys' Clothing & Shoes",
]

PRICE_RANGE = (5.80, 149.99)


def generate_catalog(seed: int, count: int = 100) -> list[Product]:
    """Synthetic catalog spanning the same price range as the curated dataset."""
    rng = random.Random(seed)
    low, high = PRICE_RANGE
    products = []
    for i in range(count):
        price = round(rng.uniform(low, high), 2)
        rating = round(rng.uniform(0.0, 5.0), 1)
        products.append(Product(
            name=f"Catalog Item {i + 1}",
            listed_price=price,
            rating=rating,
            category=rng.choice(_CATEGORIES),
        ))
    return products


# --------------------------------------------------------------------------
# the environment


def _parse_deal_text(text: str) -> dict[str, Any]:
    """Turn a terse scripted line into tool arguments.

    Formats: `offer 12.5 | reason`, `counter 10`, `accept`, `end`,
    `info <text>`, `ask <text>`, `pass`.
    """
    cleaned = text.strip()
    head, _, rest = cleaned.partition(" ")
    head = head.lower()
    if head in ("pass", ""):
        return {"action": "pass"}
    if head in ("offer", "counter"):
        price_text, _, justification = rest.partition("|")
        return {
            "action": "offer_price" if head == "offer" else "reject_and_counter",
            "price": price_text.strip(),
            "justification": justification.strip(),
        }
    if head == "accept":
        return {"action": "accept_offer"}
    if head == "end":
        return {"action": "end_negotiation"}
    if head == "info":
        return {"action": "provide_information", "text": rest.strip()}
    if head == "ask":
        return {"action": "inquire_intentions", "text": rest.strip()}
    return {"action": "pass"}


class BargainingEnv(Environment):
    """All pairwise sessions for one product under the graph protocol."""

    name = "bargaining"

    def __init__(
        self,
        product: Product,
        profiles: dict[str, NegotiatorProfile],
        pairs: list[tuple[str, str]],
        recorder: Optional[EventRecorder] = None,
    ):
        super().__init__(recorder)
        self.product = product
        self.profiles = profiles
        self.sessions: dict[tuple[str, str], NegotiationState] = {}
        for a, b in pairs:
            key = tuple(sorted((a, b)))
            if key in self.sessions:
                continue
            participants = {agent: profiles[agent] for agent in key}
            sides = {participants[key[0]].side, participants[key[1]].side}
            if len(sides) != 2:
                continue  # same-side pairs do not bargain
            self.sessions[key] = NegotiationState(product=product, participants=participants)

    @classmethod
    def from_config(cls, config, recorder=None, product: Optional[Product] = None) -> "BargainingEnv":
        """Wire sessions from a run config's negotiates relations and personas.

        The scenario block may name a `catalog` file (one JSON product per
        line, picked by `product_index`) and a `personas` file (JSON map of
        agent id to profile fields); inline values win over files.
        """
        rng = random.Random(config.seed)
        scenario = config.scenario
        if product is None:
            if "product" in scenario:
                product = Product.from_dict(scenario["product"])
            elif "catalog" in scenario:
                with open(scenario["catalog"], encoding="utf-8") as fh:
                    catalog = load_catalog(fh.read())
                product = catalog[int(scenario.get("product_index", 0))]
            else:
                product = generate_catalog(config.seed, count=1)[0]
        personas_file: dict[str, Any] = {}
        if "personas" in scenario:
            import json

            with open(scenario["personas"], encoding="utf-8") as fh:
                personas_file = json.load(fh)
        profiles = {}
        for spec in config.agents:
            raw = spec.extras.get("negotiator") or personas_file.get(spec.id)
            if raw:
                profiles[spec.id] = NegotiatorProfile.from_dict(raw)
            else:
                side = Side(spec.extras.get("side", "buyer"))
                profiles[spec.id] = random_profile(side, rng)
        pairs = [
            (r.from_agent, r.to_agent)
            for r in config.relations
            if r.kind is RelationKind.NEGOTIATES
        ]
        return cls(product, profiles, pairs, recorder)

    # -- engine surface ------------------------------------------------------

    def tools(self) -> list[ToolSchema]:
        counterparty = ToolParam("counterparty", description="Agent on the other side of the table.")
        return [
            ToolSchema("offer_price", "Propose a price offer to the other party.",
                       [counterparty, ToolParam("price", type="number"),
                        ToolParam("justification", required=False)]),
            ToolSchema("reject_and_counter", "Reject the current offer and counter with a new price.",
                       [counterparty, ToolParam("price", type="number"),
                        ToolParam("justification", required=False)]),
            ToolSchema("accept_offer", "Accept the current offer and conclude the deal.",
                       [counterparty]),
            ToolSchema("provide_information", "Share information supporting your stance.",
                       [counterparty, ToolParam("text")]),
            ToolSchema("inquire_intentions", "Ask about the other party's expectations.",
                       [counterparty, ToolParam("text")]),
            ToolSchema("end_negotiation", "Walk away without an agreement.",
                       [counterparty]),
        ]

    def observe(self, agent: str) -> str:
        lines = [
            f"Product: {self.product.name} listed at ${self.product.listed_price:.2f} "
            f"(rating {self.product.rating}/5)."
        ]
        for key, session in sorted(self.sessions.items()):
            if agent not in key:
                continue
            other = key[0] if key[1] == agent else key[1]
            if session.current_offer is not None:
                offer = f"standing offer ${session.current_offer.price:.2f} by {session.current_offer.by}"
            else:
                offer = "no standing offer"
            lines.append(f"Session with {other}: {session.status}, {offer}.")
        return "\n".join(lines)

    def action_slots(self, agent: str, iteration: int) -> list[dict[str, Any]]:
        from .backend import ToolCall

        def to_call_for(other: str):
            def to_call(text: str) -> Optional[ToolCall]:
                arguments = _parse_deal_text(text)
                action = arguments.pop("action")
                if action == "pass":
                    return None
                arguments = {k: v for k, v in arguments.items() if v != ""}
                arguments["counterparty"] = other
                return ToolCall(action, arguments)

            return to_call

        slots = []
        for key, session in sorted(self.sessions.items()):
            if agent in key and session.status == "open":
                other = key[0] if key[1] == agent else key[1]
                slots.append({
                    "cue": f"deal:{other}:{iteration}",
                    "context": self.observe(agent),
                    "required": False,
                    "text_to_call": to_call_for(other),
                    "defaults": {"counterparty": other},
                })
        return slots

    def session_for(self, agent: str, counterparty: str) -> Optional[NegotiationState]:
        return self.sessions.get(tuple(sorted((agent, counterparty))))

    def _apply(self, agent: str, name: str, arguments: dict[str, Any]) -> ActionOutcome:
        action = name
        counterparty = str(arguments.get("counterparty", "") or "")
        session = self.session_for(agent, counterparty)
        if session is None:
            return ActionOutcome(error=f"no session between {agent!r} and {counterparty!r}")
        payload = {
            "price": arguments.get("price"),
            "justification": arguments.get("justification", ""),
            "text": arguments.get("text", ""),
        }
        try:
            apply_action(session, agent, action, payload)
        except NegotiationError as exc:
            return ActionOutcome(error=str(exc))
        entry = session.transcript[-1]
        self.recorder.emit(
            "negotiation_action",
            actor=agent,
            audience=sorted(session.participants),
            session="|".join(sorted(session.participants)),
            **entry.to_dict(),
        )
        if session.status != "open":
            self._emit_session_end(session)
        self._refresh_terminal()
        observation = f"{action} applied; session now {session.status}"
        if session.status == "deal":
            observation += f" at ${session.deal_price:.2f}"
        return ActionOutcome(observation=observation, terminal=self.terminal)

    def _emit_session_end(self, session: NegotiationState) -> None:
        payload: dict[str, Any] = {
            "session": "|".join(sorted(session.participants)),
            "status": session.status,
        }
        if session.status == "deal":
            payload.update(price=session.deal_price, buyer=session.deal_buyer, seller=session.deal_seller)
        self.recorder.emit("session_end", actor="env", audience=sorted(session.participants), **payload)

    def _refresh_terminal(self) -> None:
        self._terminal = all(s.status != "open" for s in self.sessions.values())

    def finish(self) -> None:
        """Close out still-open sessions as no-deal once the iteration cap hits."""
        for session in self.sessions.values():
            if session.status == "open":
                session.status = "no_deal"
                self._emit_session_end(session)
        self._refresh_terminal()

    def outcome_summary(self) -> dict[str, Any]:
        deals = [s for s in self.sessions.values() if s.status == "deal"]
        return {
            "sessions": len(self.sessions),
            "deals": len(deals),
            "deal_rate": len(deals) / len(self.sessions) if self.sessions else 0.0,
            "prices": sorted(s.deal_price for s in deals),
        }
