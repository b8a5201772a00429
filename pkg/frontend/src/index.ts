export * from "./types";
export * from "./transport";
export * from "./session";
export * from "./client";
export * from "./queue";
export * from "./decisions";
export * from "./whatif";
export * from "./timeline";
