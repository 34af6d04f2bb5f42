import pytest

from fairmatch.core import Order, OrderType, ParticipantId, Side

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, passed, detail)."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, passed, detail):
        lines.append((number, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def mk(seq, side="Buy", otype="Limit", price=100, qty=1, owner=1, firm=None, arrived=0, submitted=None,
       target=None, instrument=1):
    ot = OrderType(otype)
    return Order(
        seq=seq,
        owner=ParticipantId(owner, owner if firm is None else firm),
        instrument=instrument,
        order_type=ot,
        side=Side(side),
        limit_price=None if ot in (OrderType.MARKET, OrderType.CANCEL) else price,
        quantity=0 if ot is OrderType.CANCEL else qty,
        submitted_at=arrived if submitted is None else submitted,
        arrived_at=arrived,
        target=target,
    )


@pytest.fixture
def order():
    return mk
