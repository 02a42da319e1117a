// Typed client for the recommendation service JSON endpoints.

export interface QueryItem {
    rank: number;
    api_id: string;
    path: string;
    description: string;
    pred_score: number;
}

export interface QueryResponse {
    query_id: string;
    items: QueryItem[];
}

export interface SessionInfo {
    id: string;
    created: number;
}

export interface CloseResponse {
    model_version: number;
    retraining: boolean;
}

export interface StatsResponse {
    repo_size: number;
    model_version: number;
    sessions_open: number;
    sessions_closed: number;
}

export class ServiceError extends Error {
    constructor(
        public status: number,
        public code: string,
        message: string,
    ) {
        super(message);
        this.name = 'ServiceError';
    }
}

export class ServiceClient {
    constructor(private base: string = '') {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const init: RequestInit = { method, headers: {} };
        if (body !== undefined) {
            init.headers = { 'Content-Type': 'application/json' };
            init.body = JSON.stringify(body);
        }
        const response = await fetch(this.base + path, init);
        if (!response.ok) {
            let code = 'http_error';
            let message = `${response.status}`;
            try {
                const payload = await response.json();
                code = payload.code ?? code;
                message = payload.message ?? message;
            } catch {
                // non-JSON error body; keep the status text
            }
            throw new ServiceError(response.status, code, message);
        }
        if (response.status === 204) {
            return undefined as T;
        }
        return (await response.json()) as T;
    }

    createSession(): Promise<SessionInfo> {
        return this.request<SessionInfo>('POST', '/v1/sessions');
    }

    postQuery(sessionId: string, text: string): Promise<QueryResponse> {
        return this.request<QueryResponse>(
            'POST',
            `/v1/sessions/${encodeURIComponent(sessionId)}/queries`,
            { text },
        );
    }

    postFeedback(sessionId: string, queryId: string, apiId: string): Promise<void> {
        return this.request<void>(
            'POST',
            `/v1/sessions/${encodeURIComponent(sessionId)}/feedback`,
            { query_id: queryId, api_id: apiId },
        );
    }

    closeSession(sessionId: string): Promise<CloseResponse> {
        return this.request<CloseResponse>(
            'DELETE',
            `/v1/sessions/${encodeURIComponent(sessionId)}`,
        );
    }

    stats(): Promise<StatsResponse> {
        return this.request<StatsResponse>('GET', '/v1/stats');
    }
}
