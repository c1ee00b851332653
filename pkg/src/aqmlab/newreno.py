"""Simplified TCP NewReno sender/receiver pair, packet-granularity.

Each flow is a greedy long-lived source: it always has data to send and
emits as much as its congestion window allows. The receiver acknowledges
every data packet with a cumulative ack. Sequence numbers count packets,
not bytes.
"""

from __future__ import annotations

SLOW_START = "slow-start"
CONGESTION_AVOIDANCE = "congestion-avoidance"
FAST_RECOVERY = "fast-recovery"

RTO_MIN = 0.2  # seconds
RTO_MAX = 60.0
RTO_INITIAL = 1.0

DEFAULT_MAX_WINDOW = 10000  # packets


class NewRenoFlow:
    """Congestion state machine for one sender plus its receiver's state.

    The flow knows nothing about the event loop. ``on_ack``/``on_timeout``
    return the sequence numbers that must be retransmitted right away;
    the caller pumps new data afterwards via ``allowance``/``next_seq``.
    """

    def __init__(self, flow_id: int, rtt: float, max_window: int = DEFAULT_MAX_WINDOW):
        self.id = flow_id
        self.rtt = rtt  # two-way propagation target, excluding queueing
        self.max_window = max_window
        self.active = False
        self.epoch = 0
        # Timer bookkeeping (owned here, scheduled by the simulation).
        self.timer_gen = 0
        self.timer_armed = False
        self._reset_transfer()

    def _reset_transfer(self) -> None:
        self.cwnd = 1.0
        self.ssthresh = float(self.max_window)
        self.mode = SLOW_START
        self.highest_acked = getattr(self, "highest_sent", 0)
        self.highest_sent = self.highest_acked
        self.dup_ack_count = 0
        self.recover = -1
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = RTO_INITIAL
        self.send_times: dict[int, float] = {}
        self.retransmitted: set[int] = set()
        # Receiver side: next expected seq and out-of-order backlog.
        self.rcv_next = self.highest_sent + 1
        self.rcv_buffer: set[int] = set()

    # -- activation ---------------------------------------------------------

    def activate(self) -> None:
        """(Re)start the flow as a fresh transfer; stale packets are fenced
        off by the epoch counter."""
        self.active = True
        self.epoch += 1
        self.timer_gen += 1
        self.timer_armed = False
        self._reset_transfer()

    def deactivate(self) -> None:
        self.active = False
        self.timer_gen += 1  # cancels any pending retransmit timer
        self.timer_armed = False

    # -- sender window ------------------------------------------------------

    def in_flight(self) -> int:
        return self.highest_sent - self.highest_acked

    def allowance(self) -> int:
        """How many more packets may be emitted right now."""
        if not self.active:
            return 0
        limit = int(self.cwnd)
        if self.mode == FAST_RECOVERY and self.dup_ack_count > 3:
            limit += self.dup_ack_count - 3
        return max(0, limit - self.in_flight())

    def next_seq(self) -> int:
        self.highest_sent += 1
        return self.highest_sent

    def outstanding(self) -> bool:
        return self.highest_sent > self.highest_acked

    # -- sender events ------------------------------------------------------

    def on_ack(self, ack_no: int, now: float = 0.0) -> list[int]:
        """Process a cumulative ack; returns seqs to retransmit immediately."""
        if ack_no > self.highest_acked:
            return self._on_new_ack(ack_no, now)
        if ack_no == self.highest_acked and self.outstanding():
            return self._on_dup_ack()
        return []

    def _on_new_ack(self, ack_no: int, now: float) -> list[int]:
        self._sample_rtt(ack_no, now)
        for seq in range(self.highest_acked + 1, ack_no + 1):
            self.send_times.pop(seq, None)
            self.retransmitted.discard(seq)
        self.highest_acked = ack_no
        retransmits: list[int] = []
        if self.mode == FAST_RECOVERY:
            if ack_no >= self.recover:  # full ack: recovery complete
                self.cwnd = self.ssthresh
                self.mode = CONGESTION_AVOIDANCE
                self.dup_ack_count = 0
            else:  # partial ack: next hole is lost too
                self.dup_ack_count = 3  # drop any window inflation
                retransmits.append(self._mark_retransmit(ack_no + 1))
        else:
            self.dup_ack_count = 0
            if self.mode == SLOW_START:
                self.cwnd += 1.0
                if self.cwnd >= self.ssthresh:
                    self.mode = CONGESTION_AVOIDANCE
            else:
                self.cwnd += 1.0 / self.cwnd
        self.cwnd = min(max(self.cwnd, 1.0), float(self.max_window))
        return retransmits

    def _on_dup_ack(self) -> list[int]:
        self.dup_ack_count += 1
        if self.mode == FAST_RECOVERY:
            return []
        # Third duplicate enters fast recovery, unless this loss predates an
        # earlier recovery point (post-timeout dup acks must not halve again).
        if self.dup_ack_count == 3 and self.highest_acked > self.recover:
            self.ssthresh = max(self.cwnd / 2.0, 2.0)
            self.cwnd = self.ssthresh
            self.mode = FAST_RECOVERY
            self.recover = self.highest_sent
            return [self._mark_retransmit(self.highest_acked + 1)]
        return []

    def on_timeout(self, now: float = 0.0) -> list[int]:
        """RTO expiry: collapse to one packet and restart in slow start."""
        self.ssthresh = max(self.cwnd / 2.0, 2.0)
        self.cwnd = 1.0
        self.mode = SLOW_START
        self.dup_ack_count = 0
        self.recover = self.highest_sent
        self.rto = min(self.rto * 2.0, RTO_MAX)
        if not self.outstanding():
            return []
        return [self._mark_retransmit(self.highest_acked + 1)]

    def _mark_retransmit(self, seq: int) -> int:
        self.retransmitted.add(seq)
        return seq

    # -- RTT estimation -----------------------------------------------------

    def record_send(self, seq: int, now: float) -> None:
        if seq not in self.retransmitted and seq not in self.send_times:
            self.send_times[seq] = now

    def _sample_rtt(self, ack_no: int, now: float) -> None:
        # Karn's rule: never sample from a retransmitted segment.
        if ack_no in self.retransmitted:
            return
        sent = self.send_times.get(ack_no)
        if sent is None:
            return
        r = now - sent
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        self.rto = min(max(self.srtt + 4.0 * self.rttvar, RTO_MIN), RTO_MAX)

    # -- receiver -----------------------------------------------------------

    def receiver_deliver(self, seq: int) -> int:
        """Deliver a data packet to the receiver; returns the cumulative ack."""
        if seq == self.rcv_next:
            self.rcv_next += 1
            while self.rcv_next in self.rcv_buffer:
                self.rcv_buffer.discard(self.rcv_next)
                self.rcv_next += 1
        elif seq > self.rcv_next:
            self.rcv_buffer.add(seq)
        return self.rcv_next - 1
