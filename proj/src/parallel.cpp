#include "led/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace led::parallel {
namespace {

int default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

class Pool {
public:
    explicit Pool(int n) : size_(n) {
        for (int i = 0; i < n - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    int size() const { return size_; }

    void run(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
        if (n <= 0) return;
        {
            std::lock_guard<std::mutex> lk(m_);
            job_ = &fn;
            total_ = n;
            next_.store(0, std::memory_order_relaxed);
            pending_ = n;
            error_ = nullptr;
            ++epoch_;
        }
        cv_.notify_all();
        drain(); // calling thread works too
        std::unique_lock<std::mutex> lk(m_);
        cv_done_.wait(lk, [this] { return pending_ == 0; });
        job_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

private:
    void drain() {
        for (;;) {
            std::int64_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= total_) break;
            try {
                (*job_)(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(m_);
                if (!error_) error_ = std::current_exception();
            }
            std::lock_guard<std::mutex> lk(m_);
            if (--pending_ == 0) cv_done_.notify_all();
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
            }
            drain();
        }
    }

    int size_;
    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_;
    std::condition_variable cv_done_;
    const std::function<void(std::int64_t)>* job_ = nullptr;
    std::int64_t total_ = 0;
    std::atomic<std::int64_t> next_{0};
    std::int64_t pending_ = 0;
    std::uint64_t epoch_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

std::mutex g_pool_mutex;
std::unique_ptr<Pool> g_pool;
int g_requested = 0;

Pool* pool() {
    std::lock_guard<std::mutex> lk(g_pool_mutex);
    if (!g_pool) {
        int n = g_requested > 0 ? g_requested : default_threads();
        g_pool = std::make_unique<Pool>(n);
    }
    return g_pool.get();
}

} // namespace

int threads() { return pool()->size(); }

void set_threads(int n) {
    std::unique_ptr<Pool> old;
    {
        std::lock_guard<std::mutex> lk(g_pool_mutex);
        g_requested = n;
        old = std::move(g_pool);
    }
    old.reset();
    (void)pool();
}

void for_n(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    Pool* p = pool();
    if (p->size() == 1 || n == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    p->run(n, fn);
}

} // namespace led::parallel
