#pragma once

namespace pyrexpose {

// Index into [0, n) with mirror reflection that does not repeat the edge
// sample (…2 1 | 0 1 2 … n-1 | n-2 …). Works for any offset.
inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace pyrexpose
