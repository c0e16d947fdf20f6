/** Monotone request sequencing: responses that were superseded by a newer
 * request (e.g. a later drag sample) are discarded. */
export class RequestSequencer {
  private issued = 0;
  private applied = 0;

  next(): number {
    return ++this.issued;
  }

  /** True when the response for `seq` is still current and may be applied. */
  accept(seq: number): boolean {
    if (seq <= this.applied) return false;
    this.applied = seq;
    return true;
  }

  get inFlight(): boolean {
    return this.issued > this.applied;
  }
}
