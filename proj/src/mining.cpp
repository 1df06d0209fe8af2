#include "uvcl/mining.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace uvcl::mining {

namespace {

double norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("NegativeQueue::load: truncated stream");
    return v;
}

}  // namespace

NegativeQueue::NegativeQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("NegativeQueue: capacity must be positive");
}

void NegativeQueue::enqueue(const std::vector<double>& z, const std::string& video_id) {
    if (video_id.empty()) throw std::invalid_argument("NegativeQueue: entry needs a video id");
    if (dim_ == 0) {
        if (z.empty()) throw std::invalid_argument("NegativeQueue: empty embedding");
        dim_ = z.size();
    } else if (z.size() != dim_) {
        throw std::invalid_argument("NegativeQueue: embedding dimension " + std::to_string(z.size()) +
                                    " does not match queue dimension " + std::to_string(dim_));
    }
    if (std::fabs(norm(z) - 1.0) > 1e-6) {
        throw std::invalid_argument("NegativeQueue: embedding for video '" + video_id +
                                    "' is not unit norm");
    }
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(QueueEntry{z, video_id, next_id_++});
}

void NegativeQueue::enqueue_batch(const std::vector<std::vector<double>>& zs,
                                  const std::vector<std::string>& video_ids) {
    if (zs.size() != video_ids.size()) {
        throw std::invalid_argument("NegativeQueue: batch embeddings and video ids differ in length");
    }
    for (std::size_t i = 0; i < zs.size(); ++i) enqueue(zs[i], video_ids[i]);
}

bool NegativeQueue::warmed_up(int top_n) const {
    if (top_n < 1) throw std::invalid_argument("NegativeQueue: top_n must be at least 1");
    const std::size_t need = std::max<std::size_t>(static_cast<std::size_t>(top_n), capacity_ / 2);
    return entries_.size() >= need;
}

std::vector<const QueueEntry*> NegativeQueue::eligible(const std::string& exclude_video) const {
    std::vector<const QueueEntry*> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (exclude_video.empty() || e.video_id != exclude_video) out.push_back(&e);
    }
    return out;
}

void NegativeQueue::save(std::ostream& os) const {
    write_u64(os, capacity_);
    write_u64(os, dim_);
    write_u64(os, next_id_);
    write_u64(os, entries_.size());
    for (const auto& e : entries_) {
        write_u64(os, e.insert_id);
        write_u64(os, e.video_id.size());
        os.write(e.video_id.data(), static_cast<std::streamsize>(e.video_id.size()));
        os.write(reinterpret_cast<const char*>(e.z.data()),
                 static_cast<std::streamsize>(e.z.size() * sizeof(double)));
    }
}

NegativeQueue NegativeQueue::load(std::istream& is) {
    NegativeQueue q(static_cast<std::size_t>(read_u64(is)));
    q.dim_ = static_cast<std::size_t>(read_u64(is));
    q.next_id_ = read_u64(is);
    const std::uint64_t count = read_u64(is);
    for (std::uint64_t i = 0; i < count; ++i) {
        QueueEntry e;
        e.insert_id = read_u64(is);
        const std::uint64_t len = read_u64(is);
        e.video_id.resize(len);
        is.read(e.video_id.data(), static_cast<std::streamsize>(len));
        e.z.resize(q.dim_);
        is.read(reinterpret_cast<char*>(e.z.data()),
                static_cast<std::streamsize>(q.dim_ * sizeof(double)));
        if (!is) throw std::runtime_error("NegativeQueue::load: truncated stream");
        q.entries_.push_back(std::move(e));
    }
    return q;
}

std::vector<double> alpha_weights(const std::vector<double>& q,
                                  const std::vector<const QueueEntry*>& entries, double tau) {
    if (entries.empty()) {
        throw std::runtime_error("alpha_weights: no queue entries to weigh; warm the queue up first");
    }
    if (tau <= 0.0) throw std::invalid_argument("alpha_weights: tau must be positive");
    const double nq = norm(q);
    if (nq == 0.0) throw std::invalid_argument("alpha_weights: query has zero norm");

    std::vector<double> logits(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& z = entries[i]->z;
        if (z.size() != q.size()) {
            throw std::invalid_argument("alpha_weights: query dimension does not match queue entries");
        }
        double dot = 0.0;
        for (std::size_t d = 0; d < z.size(); ++d) dot += q[d] * z[d];
        logits[i] = dot / (nq * norm(z)) / tau;
    }
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double s = 0.0;
    std::vector<double> w(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        w[i] = std::exp(logits[i] - mx);
        s += w[i];
    }
    for (auto& v : w) v /= s;
    return w;
}

std::vector<double> alpha_weights(const std::vector<double>& q, const NegativeQueue& queue,
                                  double tau) {
    return alpha_weights(q, queue.eligible(""), tau);
}

HardNegative hard_negative_aggregate(const std::vector<double>& q, const NegativeQueue& queue,
                                     int top_n, double tau, const std::string& exclude_video) {
    if (top_n < 1) throw std::invalid_argument("hard_negative_aggregate: top_n must be at least 1");
    if (queue.size() == 0) {
        throw std::runtime_error("hard_negative_aggregate: queue is empty; warm it up before mining");
    }
    const auto eligible = queue.eligible(exclude_video);
    if (eligible.empty()) {
        throw std::runtime_error("hard_negative_aggregate: every queue entry comes from video '" +
                                 exclude_video + "'; nothing eligible to mine");
    }
    if (static_cast<std::size_t>(top_n) > eligible.size()) {
        throw std::runtime_error("hard_negative_aggregate: top_n=" + std::to_string(top_n) +
                                 " exceeds the " + std::to_string(eligible.size()) +
                                 " eligible queue entries");
    }

    const std::vector<double> alpha = alpha_weights(q, eligible, tau);
    std::vector<std::size_t> order(eligible.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (alpha[a] != alpha[b]) return alpha[a] > alpha[b];
        return eligible[a]->insert_id < eligible[b]->insert_id;  // exact ties: older wins
    });

    HardNegative out;
    out.z_hat.assign(q.size(), 0.0);
    out.entry_ids.reserve(static_cast<std::size_t>(top_n));
    out.alphas.reserve(static_cast<std::size_t>(top_n));
    for (int r = 0; r < top_n; ++r) {
        const std::size_t i = order[static_cast<std::size_t>(r)];
        out.entry_ids.push_back(eligible[i]->insert_id);
        out.alphas.push_back(alpha[i]);
        for (std::size_t d = 0; d < out.z_hat.size(); ++d) {
            out.z_hat[d] += alpha[i] * eligible[i]->z[d];
        }
    }
    return out;
}

}  // namespace uvcl::mining
