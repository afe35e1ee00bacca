/* tslint:disable */
/* eslint-disable */

export class PlanDemo {
    free(): void;
    [Symbol.dispose](): void;
    constructor(text: string, scene: string, seed: number);
    step(ticks: number): string;
}

export function bundled_plan_text(name: string): string | undefined;

export function canonical_orientation(_class: string, roll_deg: number, pitch_deg: number, yaw_deg: number): string;

export function default_scene(plan: string): string;

export function persistence_frames(seed: number, count: number, motion_mm: number, max_distance_mm: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_plandemo_free: (a: number, b: number) => void;
    readonly bundled_plan_text: (a: number, b: number) => [number, number];
    readonly canonical_orientation: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly default_scene: (a: number, b: number) => [number, number];
    readonly persistence_frames: (a: number, b: number, c: number, d: number) => [number, number];
    readonly plandemo_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly plandemo_step: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
