/* tslint:disable */
/* eslint-disable */

/**
 * One rendered scene: raw counts plus its exact class mask.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * One band as grayscale RGBA, stretched to that band's range.
     */
    band_rgba(band: number): Uint8Array;
    /**
     * Mean raw spectrum over every pixel of class `code`; empty if absent.
     */
    class_mean(code: number): Float64Array;
    cols(): number;
    /**
     * Class code of one pixel in the ground-truth mask.
     */
    label(row: number, col: number): number;
    mask_codes(): Uint8Array;
    constructor(text: string, render: number);
    rows(): number;
    /**
     * Raw counts of every band at one pixel.
     */
    spectrum(row: number, col: number): Float64Array;
}

/**
 * RGBA image of class codes in the fixed palette; invalid codes are black.
 */
export function codes_rgba(codes: Uint8Array): Uint8Array;

export function demo_scene(): string;

/**
 * Learning rate for epochs `1..=epochs`.
 */
export function lr_curve(epochs: number, warmup: number, lr_init: number, lr_max: number, lr_min: number): Float64Array;

/**
 * Median filter then per-class opening and closing.
 */
export function postprocess_codes(codes: Uint8Array, rows: number, cols: number, median_kernel: number, structuring_element: number): Uint8Array;

/**
 * Replaces a `rate` fraction of pixels with a uniformly random class.
 */
export function salt_and_pepper(codes: Uint8Array, rate: number, seed: number): Uint8Array;

/**
 * Metrics report of `pred` against `truth` as JSON.
 */
export function score(truth: Uint8Array, pred: Uint8Array, rows: number, cols: number, border_band: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly codes_rgba: (a: number, b: number) => [number, number];
    readonly demo_scene: () => [number, number];
    readonly lr_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly postprocess_codes: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly salt_and_pepper: (a: number, b: number, c: number, d: number) => [number, number];
    readonly scene_band_rgba: (a: number, b: number) => [number, number];
    readonly scene_class_mean: (a: number, b: number) => [number, number];
    readonly scene_cols: (a: number) => number;
    readonly scene_label: (a: number, b: number, c: number) => number;
    readonly scene_mask_codes: (a: number) => [number, number];
    readonly scene_new: (a: number, b: number, c: number) => [number, number, number];
    readonly scene_rows: (a: number) => number;
    readonly scene_spectrum: (a: number, b: number, c: number) => [number, number];
    readonly score: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
