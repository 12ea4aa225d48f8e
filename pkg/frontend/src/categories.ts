/** The seven closed edit categories plus the open Other variant. */

export const CATEGORY_NAMES = [
  'Cliche',
  'UnnecessaryRedundantExposition',
  'PurpleProse',
  'PoorSentenceStructure',
  'LackOfSpecificityAndDetail',
  'AwkwardWordChoiceAndPhrasing',
  'TenseInconsistency',
] as const;

export type CategoryName = (typeof CATEGORY_NAMES)[number];

export const CATEGORY_LABELS: Record<CategoryName, string> = {
  Cliche: 'Cliche',
  UnnecessaryRedundantExposition: 'Unnecessary/Redundant Exposition',
  PurpleProse: 'Purple Prose',
  PoorSentenceStructure: 'Poor Sentence Structure',
  LackOfSpecificityAndDetail: 'Lack of Specificity and Detail',
  AwkwardWordChoiceAndPhrasing: 'Awkward Word Choice and Phrasing',
  TenseInconsistency: 'Tense Inconsistency',
};

/** Wire form: a bare name, or {other: name} for the free-form category. */
export type WireCategory = CategoryName | { other: string };

export function wireCategory(name: CategoryName | 'Other', otherName?: string): WireCategory {
  if (name === 'Other') {
    const trimmed = (otherName ?? '').trim();
    if (!trimmed) throw new Error('the Other category needs a name');
    return { other: trimmed };
  }
  return name;
}
