/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const codes_rgba: (a: number, b: number) => [number, number];
export const demo_scene: () => [number, number];
export const lr_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const postprocess_codes: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const salt_and_pepper: (a: number, b: number, c: number, d: number) => [number, number];
export const scene_band_rgba: (a: number, b: number) => [number, number];
export const scene_class_mean: (a: number, b: number) => [number, number];
export const scene_cols: (a: number) => number;
export const scene_label: (a: number, b: number, c: number) => number;
export const scene_mask_codes: (a: number) => [number, number];
export const scene_new: (a: number, b: number, c: number) => [number, number, number];
export const scene_rows: (a: number) => number;
export const scene_spectrum: (a: number, b: number, c: number) => [number, number];
export const score: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
