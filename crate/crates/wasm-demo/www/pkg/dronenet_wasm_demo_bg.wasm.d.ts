/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const delay_curve: (a: number, b: number, c: number, d: number) => [number, number];
export const random_network: (a: number, b: number) => [number, number];
export const survival_report: (a: number, b: number, c: number, d: number) => [number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
