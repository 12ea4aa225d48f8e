/**
 * Rank-assignment control for the three-variant preference task. Each
 * displayed slot gets exactly one of ranks 1..3; picking a rank already
 * used elsewhere steals it, so the control can never hold a duplicate and
 * submission only unlocks on a full permutation.
 */

export type Rank = 1 | 2 | 3;

export class RankingControl {
  private slots: (Rank | null)[] = [null, null, null];

  assign(slot: number, rank: Rank): void {
    if (slot < 0 || slot >= 3) throw new Error(`slot ${slot} out of range`);
    for (let i = 0; i < 3; i++) {
      if (i !== slot && this.slots[i] === rank) this.slots[i] = null;
    }
    this.slots[slot] = rank;
  }

  clear(): void {
    this.slots = [null, null, null];
  }

  rankOf(slot: number): Rank | null {
    return this.slots[slot] ?? null;
  }

  /** True iff every slot holds a distinct rank. */
  canSubmit(): boolean {
    const assigned = this.slots.filter((r): r is Rank => r !== null);
    return assigned.length === 3 && new Set(assigned).size === 3;
  }

  ranks(): [number, number, number] {
    if (!this.canSubmit()) throw new Error('ranking incomplete');
    return [this.slots[0]!, this.slots[1]!, this.slots[2]!];
  }
}
