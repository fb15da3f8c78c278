/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_session_free: (a: number, b: number) => void;
export const actionLabels: () => [number, number];
export const oracleBounds: (a: number, b: number) => [number, number, number, number];
export const session_legal: (a: number) => [number, number];
export const session_new: (a: number, b: number) => [number, number, number];
export const session_step: (a: number, b: number) => [number, number, number, number];
export const trainAgent: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
