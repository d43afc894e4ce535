import type { EntityType } from "./types.js";

/** Keyboard-first labeling: one key per entity type. */
export const KEY_TO_TYPE: Readonly<Record<string, EntityType>> = {
  m: "MOL",
  p: "POLY",
  r: "PRO",
  c: "CMT",
};

export function typeForKey(key: string): EntityType | null {
  return KEY_TO_TYPE[key.toLowerCase()] ?? null;
}
