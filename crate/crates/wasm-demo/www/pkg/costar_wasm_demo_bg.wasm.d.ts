/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_plandemo_free: (a: number, b: number) => void;
export const bundled_plan_text: (a: number, b: number) => [number, number];
export const canonical_orientation: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const default_scene: (a: number, b: number) => [number, number];
export const persistence_frames: (a: number, b: number, c: number, d: number) => [number, number];
export const plandemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const plandemo_step: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
