// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <stdexcept>

namespace varfield {

class Cancelled : public std::runtime_error {
public:
    Cancelled() : std::runtime_error("derivation cancelled") {}
};

/// Cooperative cancellation: a manual flag plus an optional deadline.
/// Long derivations poll check(), which throws Cancelled.
class CancelToken {
public:
    CancelToken() = default;
    explicit CancelToken(std::chrono::steady_clock::duration budget)
        : deadline_(std::chrono::steady_clock::now() + budget) {}

    void cancel() noexcept { flag_.store(true, std::memory_order_relaxed); }
    [[nodiscard]] bool cancelled() const noexcept {
        if (flag_.load(std::memory_order_relaxed)) return true;
        return deadline_ && std::chrono::steady_clock::now() >= *deadline_;
    }
    void check() const {
        if (cancelled()) throw Cancelled();
    }

private:
    std::atomic<bool> flag_{false};
    std::optional<std::chrono::steady_clock::time_point> deadline_;
};

/// Polls a possibly-null token.
inline void poll(const CancelToken* token) {
    if (token != nullptr) token->check();
}

namespace detail {
inline thread_local const CancelToken* active_token = nullptr;
}

/// Installs a token for the current thread; derivation loops poll it.
class CancelScope {
public:
    explicit CancelScope(const CancelToken* token) : previous_(detail::active_token) { detail::active_token = token; }
    ~CancelScope() { detail::active_token = previous_; }
    CancelScope(const CancelScope&) = delete;
    CancelScope& operator=(const CancelScope&) = delete;

private:
    const CancelToken* previous_;
};

/// Polls the token installed on this thread, if any.
inline void poll_active() { poll(detail::active_token); }

}  // namespace varfield
