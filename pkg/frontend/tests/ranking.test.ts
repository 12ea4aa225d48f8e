import { describe, expect, it } from 'vitest';

import { RankingControl, Rank } from '../src/ranking.js';

describe('RankingControl', () => {
  it('unlocks submission only on a full permutation', () => {
    const control = new RankingControl();
    expect(control.canSubmit()).toBe(false);
    control.assign(0, 1);
    control.assign(1, 2);
    expect(control.canSubmit()).toBe(false);
    control.assign(2, 3);
    expect(control.canSubmit()).toBe(true);
    expect(control.ranks()).toEqual([1, 2, 3]);
  });

  it('cannot hold a duplicate rank: reassignment steals it', () => {
    const control = new RankingControl();
    control.assign(0, 1);
    control.assign(1, 1); // steals rank 1 from slot 0
    expect(control.rankOf(0)).toBeNull();
    expect(control.rankOf(1)).toBe(1);
    expect(control.canSubmit()).toBe(false);
  });

  it('never produces a non-permutation across random click storms', () => {
    const control = new RankingControl();
    let state = 12345;
    const next = () => {
      state = (state * 1103515245 + 12345) % 2 ** 31;
      return state;
    };
    for (let i = 0; i < 500; i++) {
      control.assign(next() % 3, ((next() % 3) + 1) as Rank);
      const assigned = [0, 1, 2]
        .map((slot) => control.rankOf(slot))
        .filter((rank) => rank !== null);
      expect(new Set(assigned).size).toBe(assigned.length);
      if (control.canSubmit()) {
        expect([...control.ranks()].sort()).toEqual([1, 2, 3]);
      } else {
        expect(() => control.ranks()).toThrow();
      }
    }
  });

  it('clear resets every slot', () => {
    const control = new RankingControl();
    control.assign(0, 3);
    control.assign(1, 2);
    control.assign(2, 1);
    control.clear();
    expect(control.canSubmit()).toBe(false);
    expect(control.rankOf(0)).toBeNull();
  });

  it('rejects out-of-range slots', () => {
    const control = new RankingControl();
    expect(() => control.assign(3, 1)).toThrow();
  });
});
