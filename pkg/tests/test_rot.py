import numpy as np
import pytest

from restartguard.rot import RestartSignal, RotEmulator, RotStateError


class TestBasicProtocol:
    def test_first_set_accepted(self):
        rot = RotEmulator()
        assert rot.set_restart_time(0.0, 5.0)
        assert rot.fire_at == 5.0

    def test_second_set_ignored(self):
        rot = RotEmulator()
        assert rot.set_restart_time(0.0, 5.0)
        assert not rot.set_restart_time(1.0, 99.0)
        assert rot.fire_at == 5.0
        assert rot.ignored_sets == 1

    def test_nonpositive_delta_rejected_without_state_change(self):
        rot = RotEmulator()
        assert not rot.set_restart_time(0.0, 0.0)
        assert not rot.set_restart_time(0.0, -3.0)
        assert rot.phase == RotEmulator.AWAITING_SET
        assert rot.set_restart_time(0.0, 1.0)

    def test_fires_exactly_once_at_expiry(self):
        rot = RotEmulator()
        rot.set_restart_time(0.0, 5.0)
        assert rot.poll(4.999) is None
        sig = rot.poll(5.0)
        assert isinstance(sig, RestartSignal)
        assert sig.fire_at == 5.0
        assert rot.poll(6.0) is None

    def test_never_set_never_fires(self):
        rot = RotEmulator()
        for t in np.linspace(0.0, 100.0, 101):
            assert rot.poll(t) is None
        assert rot.phase == RotEmulator.AWAITING_SET

    def test_rearm_cycle(self):
        rot = RotEmulator()
        rot.set_restart_time(0.0, 1.0)
        assert rot.poll(1.0) is not None
        rot.rearm()
        assert rot.phase == RotEmulator.AWAITING_SET
        assert rot.set_restart_time(2.0, 1.0)
        assert rot.poll(3.0) is not None
        assert rot.cycles_completed == 1

    def test_rearm_before_fired_is_error(self):
        rot = RotEmulator()
        with pytest.raises(RotStateError):
            rot.rearm()
        rot.set_restart_time(0.0, 5.0)
        with pytest.raises(RotStateError):
            rot.rearm()

    def test_time_regression_is_error(self):
        rot = RotEmulator()
        rot.poll(5.0)
        with pytest.raises(RotStateError):
            rot.poll(4.0)

    def test_fire_time_full_precision(self):
        rot = RotEmulator()
        now, delta = 1234.56789, 0.123456789
        rot.set_restart_time(now, delta)
        assert rot.fire_at == now + delta


class TestRandomizedSequences:
    """Exactly-once set and fire per cycle over random call schedules."""

    def test_ten_thousand_random_sequences(self):
        rng = np.random.default_rng(42)
        for trial in range(10_000):
            rot = RotEmulator()
            now = 0.0
            accepted = fired = 0
            cycles = 0
            armed = None                              # (now, delta) of the accepted set
            for _ in range(int(rng.integers(3, 20))):
                now += float(rng.exponential(1.0))
                action = rng.random()
                if action < 0.5:
                    delta = float(rng.uniform(-1.0, 3.0))
                    if rot.set_restart_time(now, delta):
                        accepted += 1
                        armed = (now, delta)
                else:
                    sig = rot.poll(now)
                    if sig is not None:
                        fired += 1
                        set_now, set_delta = armed
                        assert sig.fire_at == set_now + set_delta  # bit-exact
                        assert now >= sig.fire_at
                        if rng.random() < 0.8:
                            rot.rearm()
                            cycles += 1
                assert accepted - fired in (0, 1)     # set precedes fire
                assert accepted <= cycles + 1         # one accepted set per cycle
            assert fired <= accepted
