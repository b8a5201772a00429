/** Browser-side session state: which token we hold and what it may do. */

import type { Role } from "./types";

export interface Session {
  /** Bearer token, or null before sign-in. */
  token: string | null;
  /** Role the badge was issued for; decides which controls render enabled. */
  role: Role | null;
}

export function canDecide(session: Session): boolean {
  return session.role === "physician";
}

export function readOnlyBanner(session: Session): string | null {
  if (canDecide(session)) {
    return null;
  }
  return `read-only session: decisions are disabled for role ${session.role ?? "anonymous"}`;
}
